import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from oracles import random_tiny_instance
from loadcast.fleet import EMPTY, ContainerLength, LoadingPattern
from loadcast.sampling import FullInstance, InstanceSketch, WeightModel, data_class, instance_1s, substream
from loadcast.solver import (
    InstanceTooLargeError,
    InvalidInstanceError,
    LexObjective,
    SolverConfig,
    brute_force_lpp,
    scalarization_constant,
    solve_lpp,
    verify_solution,
)
from loadcast.summarize import summarize

L40, L53 = ContainerLength.L40, ContainerLength.L53


class TestWorkedExamples:
    def test_empty_instance(self, fleet):
        inst = make_instance({3: 1, 5: 2})
        for sol in (solve_lpp(inst, fleet), brute_force_lpp(inst, fleet)):
            assert sol.objective == LexObjective(0, 0, 0)
            assert not any(sol.used)
            assert summarize(sol).vector().sum() == 0

    def test_single_53_platform_takes_both(self, fleet):
        inst = make_instance({5: 1}, w40=[15000.0], w53=[15000.0])
        assert brute_force_lpp(inst, fleet).objective.as_tuple() == (2, 53, 93)
        sol = solve_lpp(inst, fleet)
        assert sol.objective.as_tuple() == (2, 53, 93)
        assert verify_solution(inst, fleet, sol)

    def test_heavy_53_cannot_ride_on_light_40(self, fleet):
        # type 6: one 40 ft platform whose top takes a 53; type 4: three 40 ft platforms, no 53 tops
        heavy = make_instance({4: 1, 6: 1}, w40=[3750.0], w53=[30480.0])
        light = make_instance({4: 1, 6: 1}, w40=[3750.0], w53=[4850.0])
        sol = solve_lpp(heavy, fleet)
        assert sol.objective.as_tuple() == brute_force_lpp(heavy, fleet).objective.as_tuple() == (1, 40, 40)
        r6 = next(r for r, rc in enumerate(sol.railcars) if rc.type_id == 6)
        assert sol.patterns[r6][0] == LoadingPattern(L40, None)
        assert solve_lpp(light, fleet).objective.as_tuple() == (2, 40, 93)

    def test_prefers_shorter_railcar(self, fleet):
        inst = make_instance({1: 1, 5: 1}, w40=[10000.0])
        sol = solve_lpp(inst, fleet)
        assert sol.objective.as_tuple() == (1, 53, 40)
        assert [rc.type_id for rc, u in zip(sol.railcars, sol.used) if u] == [5]

    def test_invalid_instance(self, fleet):
        bad = make_instance({5: 1}, w40=[100.0])  # below tare
        with pytest.raises(InvalidInstanceError):
            solve_lpp(bad, fleet)

    def test_brute_force_refuses_large(self, fleet):
        with pytest.raises(InstanceTooLargeError):
            brute_force_lpp(make_instance({1: 2}, w40=[5000.0]), fleet)


class TestScalarization:
    @settings(max_examples=200, deadline=None)
    @given(
        a=st.tuples(st.integers(0, 40), st.integers(0, 500), st.integers(0, 2120)),
        b=st.tuples(st.integers(0, 40), st.integers(0, 500), st.integers(0, 2120)),
    )
    def test_scalarization_orders_like_lexicographic(self, fleet, a, b):
        sk = InstanceSketch((1, 0, 0, 0, 0, 0, 0, 0, 0, 1), (20, 20))  # 371 ft of railcars
        m = scalarization_constant(sk, fleet)
        oa, ob = LexObjective(*a), LexObjective(*b)
        if max(a[1], b[1]) > 371:
            return
        assert (oa.key() < ob.key()) == (oa.scalarize(m) < ob.scalarize(m))


class TestOracleEquivalence:
    def test_random_tiny_instances(self, fleet):
        rng = substream(2024, 77)
        for _ in range(300):
            inst = random_tiny_instance(rng, fleet)
            sol = solve_lpp(inst, fleet)
            assert sol.optimal
            assert verify_solution(inst, fleet, sol)
            assert sol.objective == brute_force_lpp(inst, fleet).objective, inst

    def test_search_fallback_path(self, fleet, monkeypatch):
        # a tiny node budget forces the integer-programming fallback on most instances
        import loadcast.solver as solver

        monkeypatch.setattr(solver, "_DFS_NODES", 3)
        rng = substream(99, 1)
        for _ in range(60):
            inst = random_tiny_instance(rng, fleet)
            sol = solve_lpp(inst, fleet)
            assert verify_solution(inst, fleet, sol)
            assert sol.objective == brute_force_lpp(inst, fleet).objective

    def test_node_limit_flags_result(self, fleet):
        inst = instance_1s(3, data_class("C'"), 5, fleet, WeightModel())
        sol = solve_lpp(inst, fleet, SolverConfig(node_limit=5))
        assert verify_solution(inst, fleet, sol)
        assert not sol.optimal
        assert sol.objective.key() <= solve_lpp(inst, fleet).objective.key()

    @pytest.mark.parametrize("eps", [0.05, 0.2])
    def test_gap_mode_within_tolerance(self, fleet, eps):
        for i in range(15):
            inst = instance_1s(i, data_class("A'"), 3, fleet, WeightModel())
            exact = solve_lpp(inst, fleet)
            approx = solve_lpp(inst, fleet, SolverConfig.with_gap(eps))
            assert verify_solution(inst, fleet, approx)
            m = scalarization_constant(inst.sketch, fleet)
            best = exact.objective.scalarize(m)
            assert approx.objective.scalarize(m) >= best - eps * abs(best)


class TestVerify:
    def _stacked(self, fleet, bottom=31000.0, top=31000.0):
        inst = make_instance({5: 1}, w53=[bottom, top])
        return inst, solve_lpp(inst, fleet)

    def test_solver_output_verifies(self, fleet):
        inst, sol = self._stacked(fleet)
        assert sol.objective.loaded_containers == 2
        assert verify_solution(inst, fleet, sol)

    def test_duplicate_assignment_rejected(self, fleet):
        inst, sol = self._stacked(fleet)
        p0, p1 = sol.placements
        bad = dataclasses.replace(sol, placements=(p0, dataclasses.replace(p1, container_id=p0.container_id)))
        assert not verify_solution(inst, fleet, bad)

    def test_one_kilogram_over_capacity_rejected(self, fleet):
        # capacity 62000 kg; both weight splits below are centre-of-mass feasible
        inst, sol = self._stacked(fleet)
        bottom = next(p.container_id for p in sol.placements if p.slot == "bottom")
        w = inst.weights[1].copy()
        w[bottom] += 1.0
        heavier = FullInstance(inst.sketch, (inst.weights[0], w))
        assert not verify_solution(heavier, fleet, sol)

    def test_wrong_pattern_rejected(self, fleet):
        inst, sol = self._stacked(fleet)
        bad = dataclasses.replace(sol, patterns=((LoadingPattern(L40, L40),),))
        assert not verify_solution(inst, fleet, bad)

    def test_misreported_objective_rejected(self, fleet):
        inst, sol = self._stacked(fleet)
        bad = dataclasses.replace(sol, objective=LexObjective(2, 53, 100))
        assert not verify_solution(inst, fleet, bad)

    def test_dropped_placement_rejected(self, fleet):
        inst, sol = self._stacked(fleet)
        assert not verify_solution(inst, fleet, dataclasses.replace(sol, placements=sol.placements[:1]))


class TestInvariants:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), extra=st.integers(1, 10))
    def test_adding_a_railcar_never_hurts(self, fleet, seed, extra):
        inst = instance_1s(seed % 1000, data_class("A'"), seed, fleet, WeightModel())
        counts = list(inst.sketch.railcar_counts)
        counts[extra - 1] += 1
        more = FullInstance(InstanceSketch(tuple(counts), inst.sketch.container_counts), inst.weights)
        assert (
            solve_lpp(more, fleet).objective.loaded_containers >= solve_lpp(inst, fleet).objective.loaded_containers
        )

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_removing_a_container_never_helps(self, fleet, seed):
        inst = instance_1s(seed % 1000, data_class("A'"), seed, fleet, WeightModel())
        n40, n53 = inst.sketch.container_counts
        if n40 + n53 == 0:
            return
        if n40:
            fewer = FullInstance(InstanceSketch(inst.sketch.railcar_counts, (n40 - 1, n53)), (inst.weights[0][1:], inst.weights[1]))
        else:
            fewer = FullInstance(InstanceSketch(inst.sketch.railcar_counts, (n40, n53 - 1)), (inst.weights[0], inst.weights[1][1:]))
        assert (
            solve_lpp(fewer, fleet).objective.loaded_containers <= solve_lpp(inst, fleet).objective.loaded_containers
        )

    @pytest.mark.parametrize("tag", ["A'", "B'", "C'", "D'"])
    def test_used_slot_accounting_and_summary(self, fleet, tag):
        for i in range(8):
            inst = instance_1s(i, data_class(tag), 17, fleet, WeightModel())
            sol = solve_lpp(inst, fleet)
            assert verify_solution(inst, fleet, sol)
            used_slots = sum(fleet.type(rc.type_id).slots for rc, u in zip(sol.railcars, sol.used) if u)
            assert sol.objective.loaded_containers <= used_slots
            for rc, pats, u in zip(sol.railcars, sol.patterns, sol.used):
                assert u == any(p != EMPTY for p in pats)
            assert summarize(sol).within(inst.sketch)

    def test_bitwise_deterministic(self, fleet):
        for i in range(10):
            inst = instance_1s(i, data_class("C'"), 8, fleet, WeightModel())
            a, b = solve_lpp(inst, fleet), solve_lpp(inst, fleet)
            assert a == b and a.to_dict() == b.to_dict()

    def test_equal_weights_break_ties_by_id(self, fleet):
        inst = make_instance({5: 1}, w53=[20000.0, 20000.0, 20000.0])
        sol = solve_lpp(inst, fleet)
        assert sorted(p.container_id for p in sol.placements) == [0, 1]
