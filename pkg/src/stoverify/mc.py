"""Euler-Maruyama simulation of the switched SDE under switching policies.

The engine is the falsification oracle for certified bounds: it estimates
satisfaction and reach probabilities with exact binomial confidence
intervals. Trajectories freeze at their first exit from the state-space box
(the stopped process), with the crossing located by linear interpolation
inside the offending step. Label traces are run-length compressed on the
simulation grid, which approximates the continuous-time trace; dt is the
accuracy knob.

Determinism: trajectories are simulated in fixed chunks, each chunk drawing
from its own child of the root seed, so results depend only on (seed, n, dt,
policy) and not on threading or batch scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import beta

from .automaton import Dfa, translate
from .errors import MissingRatesError, SchemaError, StepTooLargeError
from .ltl import Formula
from .predicates import Pred, sample_in_pred
from .system import SwitchedSystem

CHUNK = 4096


# -- switching policies ---------------------------------------------------------

class Policy:
    """Chooses the initial mode and per-step mode updates for a batch."""

    name = "policy"

    def validate(self, system: SwitchedSystem, dt: float) -> None:
        pass

    def initial(self, system: SwitchedSystem, n: int, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def step(
        self,
        system: SwitchedSystem,
        modes: np.ndarray,
        X: np.ndarray,
        dt: float,
        u: np.ndarray,
    ) -> np.ndarray:
        raise NotImplementedError


class ConstantPolicy(Policy):
    """Stay in one mode forever."""

    def __init__(self, mode_id: str):
        self.mode_id = mode_id
        self.name = f"constant:{mode_id}"

    def initial(self, system, n, u):
        return np.full(n, system.mode_index(self.mode_id), dtype=np.int64)

    def step(self, system, modes, X, dt, u):
        return modes


class RandomDwellPolicy(Policy):
    """Switch to a uniformly random other mode with probability rate*dt per step."""

    def __init__(self, rate: float = 1.0):
        if rate < 0:
            raise SchemaError("dwell rate must be nonnegative")
        self.rate = float(rate)
        self.name = f"random_dwell:{rate:g}"

    def validate(self, system, dt):
        if self.rate * dt > 0.1:
            raise StepTooLargeError(
                f"switch probability {self.rate * dt:.3f} per step exceeds 0.1; "
                "reduce dt"
            )

    def initial(self, system, n, u):
        return (u * len(system.modes)).astype(np.int64).clip(0, len(system.modes) - 1)

    def step(self, system, modes, X, dt, u):
        m = len(system.modes)
        if m == 1:
            return modes
        p = self.rate * dt
        jump = u < p
        # map the sub-uniform u/p onto the m-1 other modes
        pick = (u / p * (m - 1)).astype(np.int64).clip(0, m - 2)
        target = np.where(pick >= modes, pick + 1, pick)
        return np.where(jump, target, modes)


class MarkovJumpPolicy(Policy):
    """Jump m -> m' with probability rate[m][m'](x)*dt per step."""

    name = "markov_jump"

    def validate(self, system, dt):
        rates = system.require_rates()
        from .poly import bound_abs_on_box

        worst = 0.0
        for i in range(len(system.modes)):
            total = sum(
                bound_abs_on_box(rates[i][j], system.lower, system.upper)
                for j in range(len(system.modes))
                if j != i
            )
            worst = max(worst, total)
        if worst * dt > 0.1:
            raise StepTooLargeError(
                f"total jump probability up to {worst * dt:.3f} per step exceeds 0.1; "
                "reduce dt"
            )

    def initial(self, system, n, u):
        system.require_rates()
        return (u * len(system.modes)).astype(np.int64).clip(0, len(system.modes) - 1)

    def step(self, system, modes, X, dt, u):
        m = len(system.modes)
        if m == 1:
            return modes
        lam = system.rates_batch(X)  # (n, m, m)
        probs = lam[np.arange(X.shape[0]), modes, :] * dt
        probs[np.arange(X.shape[0]), modes] = 0.0
        np.clip(probs, 0.0, None, out=probs)
        cum = np.cumsum(probs, axis=1)
        out = modes.copy()
        for j in range(m):
            locum = cum[:, j] - probs[:, j]
            hit = (u >= locum) & (u < cum[:, j])
            out = np.where(hit, j, out)
        return out


class GreedyPolicy(Policy):
    """Adversarial: each step pick the mode whose drift points at the target."""

    def __init__(self, target: Pred):
        self.target = target
        self.name = "greedy"

    def initial(self, system, n, u):
        return np.zeros(n, dtype=np.int64)

    def step(self, system, modes, X, dt, u):
        best = None
        arg = None
        for i, mode in enumerate(system.modes):
            ahead = X.copy()
            for axis in range(system.dim):
                ahead[:, axis] += mode.drift[axis].eval_batch(X) * dt
            score = self.target.violation_batch(ahead)
            if best is None:
                best, arg = score, np.full(X.shape[0], i, dtype=np.int64)
            else:
                better = score < best
                best = np.where(better, score, best)
                arg = np.where(better, i, arg)
        return arg


def default_policies(
    system: SwitchedSystem, target: Optional[Pred] = None, dwell_rate: float = 1.0
) -> List[Policy]:
    """The falsification battery: constants, random dwell, rate jumps, greedy."""
    out: List[Policy] = [ConstantPolicy(m.id) for m in system.modes]
    if len(system.modes) > 1:
        out.append(RandomDwellPolicy(dwell_rate))
        if system.rates is not None:
            out.append(MarkovJumpPolicy())
        if target is not None:
            out.append(GreedyPolicy(target))
    return out


# -- trajectories and traces -----------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray        # (S+1,)
    states: np.ndarray       # (S+1, n)
    modes: np.ndarray        # (S+1,) mode indices; modes[j] acts on [t_j, t_{j+1})
    frozen_at: Optional[float]  # time of first exit from the box, if any


@dataclass(frozen=True)
class TraceWord:
    letters: Tuple[str, ...]
    entry_times: Tuple[float, ...]


def trace_of(system: SwitchedSystem, traj: Trajectory) -> TraceWord:
    """Run-length compressed labels with entry times; first letter at t=0."""
    codes = system.label_codes(traj.states)
    letters = [system.alphabet[codes[0]]]
    times = [float(traj.times[0])]
    for j in range(1, len(codes)):
        if codes[j] != codes[j - 1]:
            letters.append(system.alphabet[codes[j]])
            times.append(float(traj.times[j]))
    return TraceWord(tuple(letters), tuple(times))


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int
    estimate: float
    ci_lo: float
    ci_hi: float
    confidence: float

    @classmethod
    def from_counts(cls, successes: int, trials: int, confidence: float = 0.95):
        if trials <= 0:
            raise ValueError("trials must be positive")
        alpha = 1.0 - confidence
        k = successes
        lo = 0.0 if k == 0 else float(beta.ppf(alpha / 2, k, trials - k + 1))
        hi = 1.0 if k == trials else float(beta.ppf(1 - alpha / 2, k + 1, trials - k))
        return cls(k, trials, k / trials, lo, hi, confidence)

    def refutes_lower_bound(self, bound: float) -> bool:
        return self.ci_hi < bound

    def refutes_upper_bound(self, bound: float) -> bool:
        return self.ci_lo > bound


# -- the stepping core -------------------------------------------------------------

def _dfa_tables(dfa: Dfa, alphabet: Sequence[str]):
    """Integer transition table aligned with the system's alphabet order."""
    state_ix = {q: i for i, q in enumerate(dfa.states)}
    letter_ix = {a: j for j, a in enumerate(dfa.alphabet)}
    table = np.zeros((len(dfa.states), len(alphabet)), dtype=np.int64)
    for i, q in enumerate(dfa.states):
        for code, prop in enumerate(alphabet):
            table[i, code] = state_ix[dfa.delta[(q, prop)]]
    accepting = np.array([q in dfa.accepting for q in dfa.states])
    initial = state_ix[min(dfa.initial)]
    return table, accepting, initial


def _euler_step(system, X, modes, z, dt):
    out = X.copy()
    sq = math.sqrt(dt)
    for i, mode in enumerate(system.modes):
        rows = np.flatnonzero(modes == i)
        if rows.size == 0:
            continue
        sub = X[rows]
        for axis in range(system.dim):
            drift = mode.drift[axis].eval_batch(sub)
            diff = 0.0
            for k in range(system.noise_dim):
                g = mode.diffusion[axis][k]
                if g.is_zero():
                    continue
                diff = diff + g.eval_batch(sub) * z[rows, k]
            out[rows, axis] = sub[:, axis] + drift * dt + diff * sq
    return out


def _freeze_at_boundary(system, X, X_next, newly_out):
    """Pull exiting steps back to the box wall by linear interpolation."""
    rows = np.flatnonzero(newly_out)
    for r in rows:
        x, y = X[r], X_next[r]
        alpha = 1.0
        for axis in range(system.dim):
            d = y[axis] - x[axis]
            if y[axis] > system.upper[axis] and d > 0:
                alpha = min(alpha, (system.upper[axis] - x[axis]) / d)
            elif y[axis] < system.lower[axis] and d < 0:
                alpha = min(alpha, (system.lower[axis] - x[axis]) / d)
        X_next[r] = x + max(alpha, 0.0) * (y - x)
        np.clip(X_next[r], system.lower, system.upper, out=X_next[r])
    return X_next


def _run_chunk(
    system: SwitchedSystem,
    X0: np.ndarray,
    policy: Policy,
    dt: float,
    steps: int,
    rng: np.random.Generator,
    dfa: Optional[Tuple[np.ndarray, np.ndarray, int]],
    target: Optional[Pred],
    record: bool,
):
    n = X0.shape[0]
    r = system.noise_dim
    X = X0.copy()
    frozen = np.zeros(n, dtype=bool)
    frozen_time = np.full(n, np.nan)
    modes = policy.initial(system, n, rng.random(n))
    reached = (
        target.contains_batch(X) if target is not None else np.zeros(n, dtype=bool)
    )
    if dfa is not None:
        table, accepting, q0 = dfa
        codes = system.label_codes(X)
        states = table[q0, codes]
        prev = codes
    if record:
        path_states = [X.copy()]
        path_modes = [modes.copy()]
    for j in range(steps):
        z = rng.standard_normal((n, r)) if r else np.zeros((n, 0))
        u = rng.random(n)
        active = ~frozen
        modes = np.where(active, policy.step(system, modes, X, dt, u), modes)
        X_next = _euler_step(system, X, modes, z, dt)
        X_next[frozen] = X[frozen]
        out_now = ~np.all((X_next >= system.lower) & (X_next <= system.upper), axis=1)
        newly_out = out_now & active
        if newly_out.any():
            X_next = _freeze_at_boundary(system, X, X_next, newly_out)
            frozen_time[newly_out] = (j + 1) * dt
            frozen |= newly_out
        X = X_next
        if target is not None:
            reached |= target.contains_batch(X)
        if dfa is not None:
            codes = system.label_codes(X)
            moved = codes != prev
            if moved.any():
                states = np.where(moved, table[states, codes], states)
                prev = codes
        if record:
            path_states.append(X.copy())
            path_modes.append(modes.copy())
    result = {"X": X, "frozen_time": frozen_time}
    if target is not None:
        result["reached"] = reached
    if dfa is not None:
        result["accepted"] = accepting[states]
    if record:
        result["path_states"] = np.stack(path_states)
        result["path_modes"] = np.stack(path_modes)
    return result


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _steps_for(system: SwitchedSystem, dt: float, horizon: Optional[float]) -> int:
    T = system.horizon if horizon is None else float(horizon)
    if dt <= 0:
        raise SchemaError("dt must be positive")
    if T <= 0:
        raise SchemaError("horizon must be positive")
    return max(1, int(math.ceil(T / dt - 1e-9)))


def simulate(
    system: SwitchedSystem,
    x0,
    policy: Policy,
    *,
    dt: float = 1e-2,
    seed: int = 0,
    horizon: Optional[float] = None,
) -> Trajectory:
    """One full trajectory with recorded states and modes."""
    policy.validate(system, dt)
    steps = _steps_for(system, dt, horizon)
    X0 = np.asarray(x0, dtype=np.float64)[None, :]
    if X0.shape[1] != system.dim:
        raise SchemaError(f"initial state must have dimension {system.dim}")
    if not system.in_box(X0)[0]:
        from .errors import OutOfStateSpaceError

        raise OutOfStateSpaceError(f"initial state {x0} outside the state-space box")
    out = _run_chunk(
        system, X0, policy, dt, steps, _chunk_rng(seed, 0), None, None, True
    )
    ft = out["frozen_time"][0]
    return Trajectory(
        times=np.arange(steps + 1) * dt,
        states=out["path_states"][:, 0, :],
        modes=out["path_modes"][:, 0],
        frozen_at=None if np.isnan(ft) else float(ft),
    )


def _batched(system, X0, policy, dt, steps, seed, dfa, target):
    n = X0.shape[0]
    acc_reach = []
    acc_accept = []
    for c, start in enumerate(range(0, n, CHUNK)):
        chunk = X0[start : start + CHUNK]
        out = _run_chunk(
            system, chunk, policy, dt, steps, _chunk_rng(seed, c), dfa, target, False
        )
        if target is not None:
            acc_reach.append(out["reached"])
        if dfa is not None:
            acc_accept.append(out["accepted"])
    return (
        np.concatenate(acc_reach) if acc_reach else None,
        np.concatenate(acc_accept) if acc_accept else None,
    )


def estimate_satisfaction(
    system: SwitchedSystem,
    start_prop: str,
    policy: Policy,
    *,
    n: int = 10_000,
    dt: float = 1e-2,
    seed: int = 0,
    formula: Optional[Formula] = None,
    horizon: Optional[float] = None,
    confidence: float = 0.95,
) -> Estimate:
    """Fraction of traces from the start region whose trace satisfies the formula."""
    policy.validate(system, dt)
    steps = _steps_for(system, dt, horizon)
    f = system.formula if formula is None else formula
    dfa = _dfa_tables(translate(f, system.alphabet), system.alphabet)
    X0 = sample_in_pred(system.region_of({start_prop}), system.lower, system.upper, n)
    _, accepted = _batched(system, X0, policy, dt, steps, seed, dfa, None)
    return Estimate.from_counts(int(accepted.sum()), n, confidence)


def estimate_reach(
    system: SwitchedSystem,
    source_props,
    target_props,
    policy: Policy,
    *,
    n: int = 10_000,
    dt: float = 1e-2,
    seed: int = 0,
    horizon: Optional[float] = None,
    confidence: float = 0.95,
) -> Estimate:
    """Fraction of trajectories from the source region that touch the target set."""
    return estimate_reach_sets(
        system,
        system.region_of(source_props),
        system.region_of(target_props),
        policy,
        n=n,
        dt=dt,
        seed=seed,
        horizon=horizon,
        confidence=confidence,
    )


def estimate_reach_sets(
    system: SwitchedSystem,
    source,
    target,
    policy: Policy,
    *,
    n: int = 10_000,
    dt: float = 1e-2,
    seed: int = 0,
    horizon: Optional[float] = None,
    confidence: float = 0.95,
) -> Estimate:
    """Reach-frequency estimate with explicit source/target state-set predicates."""
    policy.validate(system, dt)
    steps = _steps_for(system, dt, horizon)
    X0 = sample_in_pred(source, system.lower, system.upper, n)
    reached, _ = _batched(system, X0, policy, dt, steps, seed, None, target)
    return Estimate.from_counts(int(reached.sum()), n, confidence)
