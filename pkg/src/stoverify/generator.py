"""Infinitesimal generator of the mode dynamics applied to polynomials.

For dx = f dt + g dW the generator of a twice-differentiable B is
grad(B) . f + 1/2 Tr(g^T Hess(B) g); everything here stays exact over the
rationals so certificate conditions can be checked without roundoff.
"""

from __future__ import annotations

from typing import Sequence, Tuple

from .errors import DimensionMismatchError
from .poly import Poly
from .system import Mode, SwitchedSystem


def gradient(B: Poly) -> Tuple[Poly, ...]:
    return tuple(B.diff(i) for i in range(B.nvars))


def hessian(B: Poly) -> Tuple[Tuple[Poly, ...], ...]:
    grad = gradient(B)
    return tuple(tuple(g.diff(j) for j in range(B.nvars)) for g in grad)


def apply_generator(B: Poly, mode: Mode) -> Poly:
    """Generator of one mode: grad(B).f + 1/2 Tr(g^T Hess(B) g)."""
    n = B.nvars
    if len(mode.drift) != n:
        raise DimensionMismatchError(
            f"mode {mode.id!r} has dimension {len(mode.drift)}, function has {n}"
        )
    grad = gradient(B)
    out = Poly.zero(n)
    for i in range(n):
        out = out + grad[i] * mode.drift[i]
    hess = hessian(B)
    r = mode.noise_dim
    half = Poly.constant("1/2", n)
    for k in range(r):
        for i in range(n):
            gik = mode.diffusion[i][k]
            if gik.is_zero():
                continue
            for j in range(n):
                if hess[i][j].is_zero():
                    continue
                out = out + half * gik * hess[i][j] * mode.diffusion[j][k]
    return out


def apply_generator_multi(
    barriers: Sequence[Poly], system: SwitchedSystem, mode_index: int
) -> Poly:
    """Mode generator plus rate coupling: D_m B_m + sum_m' rate[m][m'] B_m'."""
    rates = system.require_rates()
    if len(barriers) != len(system.modes):
        raise DimensionMismatchError(
            f"need one function per mode: got {len(barriers)}, "
            f"system has {len(system.modes)}"
        )
    out = apply_generator(barriers[mode_index], system.modes[mode_index])
    for j, other in enumerate(barriers):
        term = rates[mode_index][j] * other
        if not term.is_zero():
            out = out + term
    return out
