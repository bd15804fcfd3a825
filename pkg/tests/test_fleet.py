import copy
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadcast.fleet import (
    EMPTY,
    ContainerLength,
    FleetConfigError,
    LoadingPattern,
    com_margin,
    default_fleet_path,
    enumerate_patterns,
    fleet_from_dict,
    load_fleet,
    pattern_weight_feasible,
    slots_of,
    validate_fleet_document,
)

L40, L53 = ContainerLength.L40, ContainerLength.L53


@pytest.fixture
def doc():
    return json.loads(default_fleet_path().read_text())


class TestDefaultFleet:
    def test_ten_types_with_one_to_five_platforms(self, fleet):
        assert len(fleet.railcar_types) == 10
        assert all(1 <= len(t.platforms) <= 5 for t in fleet.railcar_types)

    def test_slots_are_twice_platforms(self, fleet):
        assert list(slots_of(fleet)) == [2 * len(t.platforms) for t in fleet.railcar_types]

    def test_hash_is_stable_and_content_based(self, fleet, doc):
        assert fleet.hash == fleet_from_dict(doc).hash
        doc["railcar_types"][0]["platforms"][0]["tare_kg"] += 1
        assert fleet_from_dict(doc).hash != fleet.hash

    def test_round_trip_through_dict(self, fleet):
        assert fleet_from_dict(fleet.to_dict()).hash == fleet.hash


class TestValidation:
    def test_default_document_is_valid(self, doc):
        assert validate_fleet_document(doc) == []

    def test_nine_types_rejected(self, doc):
        doc["railcar_types"].pop()
        problems = validate_fleet_document(doc)
        assert problems and "railcar_types" in problems[0]
        with pytest.raises(FleetConfigError):
            fleet_from_dict(doc)

    def test_top_centre_below_bottom_rejected(self, doc):
        p = doc["railcar_types"][2]["platforms"][1]
        p["h_top_m"] = p["h_bottom_m"]
        problems = validate_fleet_document(doc)
        assert any("railcar_types[2].platforms[1].h_top_m" in s for s in problems)

    @pytest.mark.parametrize("key", ["h_tare_m", "h_bottom_m"])
    def test_heights_above_threshold_rejected(self, doc, key):
        p = doc["railcar_types"][0]["platforms"][0]
        p[key] = p["com_threshold_m"] + 0.1
        assert any(key in s for s in validate_fleet_document(doc))

    def test_duplicate_ids_rejected(self, doc):
        doc["railcar_types"][1]["id"] = 1
        assert any("ids" in s for s in validate_fleet_document(doc))

    def test_six_platforms_rejected(self, doc):
        plats = doc["railcar_types"][0]["platforms"]
        plats.append(copy.deepcopy(plats[0]))
        assert validate_fleet_document(doc)

    def test_bad_length_rejected(self, doc):
        doc["railcar_types"][0]["platforms"][0]["length_ft"] = 45
        assert validate_fleet_document(doc)

    def test_malformed_json_reports_position(self, tmp_path):
        p = tmp_path / "f.json"
        p.write_text('{\n  "railcar_types": [,\n}')
        with pytest.raises(FleetConfigError, match="line 2 column"):
            load_fleet(p)


class TestPatterns:
    def test_empty_first_and_no_duplicates(self, fleet):
        for t in fleet.railcar_types:
            for q in t.platforms:
                pats = enumerate_patterns(q)
                assert pats[0] == EMPTY
                assert len(set(pats)) == len(pats)

    def test_top_requires_bottom(self):
        with pytest.raises(ValueError):
            LoadingPattern(None, L40)

    def test_53_platform_with_53_top(self, fleet):
        q = fleet.type(5).platforms[0]  # 53 ft, 53-capable top
        assert set(enumerate_patterns(q)) == {
            EMPTY,
            LoadingPattern(L40),
            LoadingPattern(L53),
            LoadingPattern(L40, L40),
            LoadingPattern(L40, L53),
            LoadingPattern(L53, L40),
            LoadingPattern(L53, L53),
        }

    def test_40_platform_never_takes_53_bottom(self, fleet):
        for t in fleet.railcar_types:
            for q in t.platforms:
                if q.length == 40:
                    assert all(p.bottom != L53 for p in enumerate_patterns(q))

    def test_40_platform_53_top_only_over_40(self, fleet):
        q = fleet.type(2).platforms[0]  # 40 ft, top 53-capable
        assert LoadingPattern(L40, L53) in enumerate_patterns(q)

    def test_no_53_top_without_capability(self, fleet):
        q = fleet.type(4).platforms[0]
        assert not q.top_53_capable
        assert all(p.top != L53 for p in enumerate_patterns(q))


class TestWeightFeasibility:
    def test_heavy_over_light_violates_com(self, fleet):
        q = fleet.type(5).platforms[0]
        pat = LoadingPattern(L53, L53)
        assert not pattern_weight_feasible(pat, 4850.0, 30000.0, q)
        assert pattern_weight_feasible(pat, 30000.0, 4850.0, q)

    def test_capacity_is_a_hard_limit(self, fleet):
        q = fleet.type(5).platforms[0]
        pat = LoadingPattern(L53, L53)
        half = q.weight_capacity / 2
        assert pattern_weight_feasible(pat, half + 5000, half - 5000, q)
        assert not pattern_weight_feasible(pat, half + 5000, half - 5000 + 1, q)

    def test_margin_matches_centre_of_mass_formula(self, fleet):
        q = fleet.type(3).platforms[0]
        b, u = 21000.0, 17000.0
        com = (q.tare * q.h_tare + b * q.h_bottom + u * q.h_top) / (q.tare + b + u)
        assert (com <= q.com_threshold) == (com_margin(q, b, u) <= 0)

    def test_negative_weight_rejected(self, fleet):
        with pytest.raises(ValueError):
            pattern_weight_feasible(LoadingPattern(L40), -1.0, 0.0, fleet.type(1).platforms[0])

    @settings(max_examples=200, deadline=None)
    @given(
        t=st.integers(1, 10),
        b=st.floats(3750, 31000),
        u=st.floats(3750, 31000),
        d=st.floats(0, 5000),
    )
    def test_lighter_top_never_hurts(self, fleet, t, b, u, d):
        q = fleet.type(t).platforms[0]
        pat = LoadingPattern(L40, L40) if q.length == 40 else LoadingPattern(L53, L40)
        if pattern_weight_feasible(pat, b, u, q):
            assert pattern_weight_feasible(pat, b, max(0.0, u - d), q)

    @settings(max_examples=200, deadline=None)
    @given(t=st.integers(1, 10), b=st.floats(3750, 31000))
    def test_bottom_only_limited_by_capacity_alone(self, fleet, t, b):
        q = fleet.type(t).platforms[0]
        assert pattern_weight_feasible(LoadingPattern(L40), b, 0.0, q) == (b <= q.weight_capacity)
