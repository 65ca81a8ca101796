"""Simulation engine: determinism, stopping, traces, and estimate statistics."""

import math

import numpy as np
import pytest

from stoverify.errors import OutOfStateSpaceError, SchemaError, StepTooLargeError
from stoverify.ltl import parse_formula
from stoverify.mc import (
    ConstantPolicy,
    Estimate,
    MarkovJumpPolicy,
    RandomDwellPolicy,
    default_policies,
    estimate_reach,
    estimate_reach_sets,
    estimate_satisfaction,
    simulate,
    trace_of,
)
from stoverify.poly import parse_poly
from stoverify.predicates import PolyLeq
from stoverify.system import system_from_document


def _drift_doc(drift="1", horizon=1):
    return {
        "name": "ramp",
        "dimension": 1,
        "noise_dimension": 0,
        "state_space": {"lower": [-1], "upper": [1]},
        "horizon": horizon,
        "formula": "G !p1",
        "modes": [{"id": "hold", "drift": [drift]}],
        "regions": [
            {"prop": "p0", "inequalities": ["x1^2 - 0.01"]},
            {"prop": "p1", "inequalities": ["0.9 - x1", "x1 - 1"]},
        ],
        "complement_prop": "p2",
    }


class TestSimulate:
    def test_deterministic_trajectory(self, brownian1d):
        a = simulate(brownian1d, [0.0], ConstantPolicy("W"), dt=1e-2, seed=7)
        b = simulate(brownian1d, [0.0], ConstantPolicy("W"), dt=1e-2, seed=7)
        assert (a.states == b.states).all()
        c = simulate(brownian1d, [0.0], ConstantPolicy("W"), dt=1e-2, seed=8)
        assert not (a.states == c.states).all()

    def test_deterministic_ramp_and_freeze(self):
        sys = system_from_document(_drift_doc(horizon=2))
        traj = simulate(sys, [0.5], ConstantPolicy("hold"), dt=0.01)
        # x(t) = 0.5 + t leaves the box at t = 0.5 and stays frozen there.
        assert traj.frozen_at == pytest.approx(0.5, abs=1e-9)
        assert traj.states[-1, 0] == pytest.approx(1.0)
        assert traj.states[120, 0] == pytest.approx(1.0)
        assert traj.states[30, 0] == pytest.approx(0.8)

    def test_shapes_and_times(self, det1d):
        traj = simulate(det1d, [0.0], ConstantPolicy("hold"), dt=0.25)
        assert traj.states.shape == (5, 1)
        assert traj.times.tolist() == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
        assert traj.modes.shape == (5,)
        assert traj.frozen_at is None

    def test_bad_inputs(self, det1d):
        with pytest.raises(OutOfStateSpaceError):
            simulate(det1d, [2.0], ConstantPolicy("hold"))
        with pytest.raises(SchemaError):
            simulate(det1d, [0.0, 0.0], ConstantPolicy("hold"))
        with pytest.raises(SchemaError):
            simulate(det1d, [0.0], ConstantPolicy("hold"), dt=-1.0)


class TestTraces:
    def test_run_length_compression(self):
        sys = system_from_document(_drift_doc())
        # crossings land mid-step so float accumulation can't flip a label
        traj = simulate(sys, [-0.505], ConstantPolicy("hold"), dt=0.01)
        word = trace_of(sys, traj)
        assert word.letters == ("p2", "p0", "p2")
        assert word.entry_times[0] == 0.0
        assert word.entry_times[1] == pytest.approx(0.41, abs=1e-9)
        assert word.entry_times[2] == pytest.approx(0.61, abs=1e-9)

    def test_constant_trace(self, det1d):
        traj = simulate(det1d, [0.0], ConstantPolicy("hold"), dt=0.1)
        word = trace_of(det1d, traj)
        assert word.letters == ("p0",)
        assert word.entry_times == (0.0,)


class TestEstimates:
    def test_clopper_pearson_endpoints(self):
        e0 = Estimate.from_counts(0, 10)
        assert e0.ci_lo == 0.0
        assert e0.ci_hi == pytest.approx(1 - 0.025 ** (1 / 10))
        e1 = Estimate.from_counts(10, 10)
        assert e1.ci_hi == 1.0
        assert e1.ci_lo == pytest.approx(0.025 ** (1 / 10))
        with pytest.raises(ValueError):
            Estimate.from_counts(0, 0)

    def test_interval_widens_with_confidence(self):
        narrow = Estimate.from_counts(50, 100, confidence=0.9)
        wide = Estimate.from_counts(50, 100, confidence=0.99)
        assert wide.ci_lo < narrow.ci_lo < narrow.ci_hi < wide.ci_hi

    def test_refutation_predicates(self):
        e = Estimate.from_counts(10, 100)
        assert e.refutes_lower_bound(0.9)
        assert not e.refutes_lower_bound(0.05)
        assert e.refutes_upper_bound(0.01)
        assert not e.refutes_upper_bound(0.5)


class TestEstimators:
    def test_satisfaction_deterministic_in_seed(self, brownian1d):
        kw = dict(n=2000, dt=1e-2, seed=5)
        a = estimate_satisfaction(brownian1d, "p0", ConstantPolicy("W"), **kw)
        b = estimate_satisfaction(brownian1d, "p0", ConstantPolicy("W"), **kw)
        assert a == b

    def test_satisfaction_complementary(self, brownian1d_wide):
        # Same traces, complementary acceptance: the counts must sum exactly.
        f = brownian1d_wide.formula
        g = parse_formula("!(G !p1)")
        kw = dict(n=3000, dt=1e-2, seed=11)
        a = estimate_satisfaction(brownian1d_wide, "p0", ConstantPolicy("W"), **kw)
        b = estimate_satisfaction(
            brownian1d_wide, "p0", ConstantPolicy("W"), formula=g, **kw
        )
        assert a.successes + b.successes == a.trials

    def test_brownian_exit_matches_reflection(self, brownian1d_wide):
        # From near 0, P(max_{t<=1} W_t < 0.5) ~ 2*Phi(0.5) - 1 = 0.3829
        # (plus start-region width and discretization slack).
        est = estimate_satisfaction(
            brownian1d_wide, "p0", ConstantPolicy("W"), n=4000, dt=2.5e-4, seed=3
        )
        ref = 2 * 0.6914624613 - 1
        assert est.ci_lo - 0.02 <= ref <= est.ci_hi + 0.02

    def test_reach_deterministic_ramp(self):
        sys = system_from_document(_drift_doc())
        hit = estimate_reach(sys, ["p0"], ["p1"], ConstantPolicy("hold"), n=64, dt=0.01)
        assert hit.estimate == 1.0  # x1 rises ~1 within the horizon from [-0.1, 0.1]
        slow = system_from_document(_drift_doc(drift="0.2"))
        miss = estimate_reach(slow, ["p0"], ["p1"], ConstantPolicy("hold"), n=64, dt=0.01)
        assert miss.estimate == 0.0

    def test_reach_sets_accepts_raw_predicates(self, brownian1d):
        level = PolyLeq(parse_poly("1 - x1", 1))  # {x >= 1}
        est = estimate_reach_sets(
            brownian1d,
            PolyLeq(parse_poly("x1^2 - 0.01", 1)),
            level,
            ConstantPolicy("W"),
            n=2000,
            dt=1e-2,
            seed=1,
        )
        # P(max W > 1) = 2(1 - Phi(1)) ~ 0.3173 from 0.
        assert 0.25 < est.estimate < 0.40

    def test_sampling_chunk_boundary(self, det1d):
        # n above one chunk exercises the multi-chunk path deterministically.
        est = estimate_satisfaction(
            det1d, "p0", ConstantPolicy("hold"), n=5000, dt=0.5, seed=0
        )
        assert est.estimate == 1.0 and est.trials == 5000


class TestPolicies:
    def test_step_too_large(self, brownian2mode):
        with pytest.raises(StepTooLargeError):
            estimate_satisfaction(
                brownian2mode, "p0", RandomDwellPolicy(rate=5.0), n=10, dt=0.5
            )
        with pytest.raises(StepTooLargeError):
            estimate_satisfaction(
                brownian2mode, "p0", MarkovJumpPolicy(), n=10, dt=0.5
            )

    def test_default_battery(self, brownian2mode, det1d):
        names = [p.name for p in default_policies(brownian2mode)]
        assert names[0] == "mode:calm" or names[0].endswith("calm")
        assert any("dwell" in n for n in names)
        assert "markov_jump" in names
        assert len(default_policies(det1d)) == 1

    def test_markov_jump_switches_modes(self, brownian2mode):
        seen = set()
        for seed in range(8):
            traj = simulate(brownian2mode, [0.0], MarkovJumpPolicy(), dt=1e-2, seed=seed)
            seen |= {int(m) for m in np.unique(traj.modes)}
        assert seen == {0, 1}

    def test_constant_policy_unknown_mode(self, det1d):
        with pytest.raises(Exception):
            simulate(det1d, [0.0], ConstantPolicy("warp"), dt=0.1)
