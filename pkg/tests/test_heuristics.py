import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadcast.heuristics import heur_s, heur_v, usable_53_slots
from loadcast.sampling import InstanceSketch

HEURISTICS = [heur_v, heur_s]


def sketch(railcars, n40, n53):
    counts = [0] * 10
    for t, n in railcars.items():
        counts[t - 1] = n
    return InstanceSketch(tuple(counts), (n40, n53))


def summary_vec(used, n40, n53):
    v = [0] * 12
    for t, n in used.items():
        v[t - 1] = n
    v[10], v[11] = n40, n53
    return v


sketches = st.builds(
    lambda cars, n40, n53: InstanceSketch(tuple(cars), (n40, n53)),
    st.lists(st.integers(0, 4), min_size=10, max_size=10),
    st.integers(0, 60),
    st.integers(0, 60),
)


def capable_53_slots(fleet, type_id):
    """Slots that can hold a 53 ft container, counted platform by platform."""
    n = 0
    for q in fleet.type(type_id).platforms:
        if q.length == 53:
            n += 1 + int(q.top_53_capable)
        elif q.top_53_capable:
            n += 1  # top over a 40 ft bottom
    return n


class TestHeurV:
    def test_alternates_within_a_railcar(self, fleet):
        # type 10: two platforms, four slots
        assert list(heur_v(sketch({10: 1}, 3, 2), fleet).vector()) == summary_vec({10: 1}, 2, 2)

    def test_walks_types_in_order_and_restarts_alternation(self, fleet):
        # two single-platform type-5 cars take 40, 53 each; the type-6 car takes the last 40
        assert list(heur_v(sketch({5: 2, 6: 1}, 3, 2), fleet).vector()) == summary_vec({5: 2, 6: 1}, 3, 2)

    def test_ignores_53_capability(self, fleet):
        # type 8 has no 53 ft slots at all, yet the slot-only heuristic loads 53s
        assert list(heur_v(sketch({8: 1}, 0, 3), fleet).vector()) == summary_vec({8: 1}, 0, 3)

    def test_more_containers_than_slots(self, fleet):
        assert list(heur_v(sketch({9: 1}, 0, 5), fleet).vector()) == summary_vec({9: 1}, 0, 2)


class TestHeurS:
    def test_two_phase_trace(self, fleet):
        # type 6: 40 ft platform with a 53-capable top; type 9: 53 ft platform, plain top.
        # Phase 1 picks the shorter type 6 (one usable 53 slot each) and puts a 40 underneath;
        # phase 2 puts the last 40 on type 9.
        assert list(heur_s(sketch({6: 1, 9: 1}, 2, 1), fleet).vector()) == summary_vec({6: 1, 9: 1}, 2, 1)

    def test_phase_one_falls_back_to_smallest_capability(self, fleet):
        # 3 x 53: type 6 (1 usable) fits the demand first, then only type 10 (4 usable) remains
        got = heur_s(sketch({4: 1, 6: 1, 10: 1}, 3, 3), fleet)
        assert list(got.vector()) == summary_vec({6: 1, 10: 1}, 3, 3)

    def test_phase_two_largest_fitting_then_smallest(self, fleet):
        got = heur_s(sketch({2: 1, 6: 2}, 3, 0), fleet)
        assert list(got.vector()) == summary_vec({6: 2}, 3, 0)

    def test_conditional_top_needs_a_40(self, fleet):
        t6 = fleet.type(6)
        assert usable_53_slots(t6, remaining_40=0) == 0
        assert usable_53_slots(t6, remaining_40=5) == 1
        assert list(heur_s(sketch({6: 1}, 0, 2), fleet).vector()) == summary_vec({}, 0, 0)

    def test_no_53_on_incapable_cars(self, fleet):
        assert list(heur_s(sketch({4: 2, 8: 1}, 0, 5), fleet).vector()) == summary_vec({}, 0, 0)

    @settings(max_examples=300, deadline=None)
    @given(sk=sketches)
    def test_53_placements_within_capability(self, fleet, sk):
        out = heur_s(sk, fleet).vector()
        cap = sum(out[j] * capable_53_slots(fleet, j + 1) for j in range(10))
        slots = sum(out[j] * fleet.type(j + 1).slots for j in range(10))
        assert out[11] <= cap
        assert out[10] + out[11] <= slots


class TestCommon:
    @pytest.mark.parametrize("fn", HEURISTICS)
    def test_zero_containers(self, fleet, fn):
        assert fn(sketch({1: 2, 5: 1}, 0, 0), fleet).vector().sum() == 0

    @pytest.mark.parametrize("fn", HEURISTICS)
    @settings(max_examples=300, deadline=None)
    @given(sk=sketches)
    def test_output_within_input(self, fleet, fn, sk):
        out = fn(sk, fleet)
        assert out.within(sk)
        assert np.all(out.vector() >= 0)

    @pytest.mark.parametrize("fn", HEURISTICS)
    @settings(max_examples=100, deadline=None)
    @given(sk=sketches)
    def test_used_cars_carry_something(self, fleet, fn, sk):
        out = fn(sk, fleet).vector()
        assert (out[:10].sum() > 0) == (out[10:].sum() > 0)

    @pytest.mark.parametrize("fn", HEURISTICS)
    def test_deterministic(self, fleet, fn):
        sk = sketch({1: 1, 3: 2, 6: 1, 10: 2}, 17, 9)
        assert fn(sk, fleet) == fn(sk, fleet)
