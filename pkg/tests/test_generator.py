"""Symbolic infinitesimal generator on polynomial test functions."""

import pytest

from stoverify.errors import DimensionMismatchError, MissingRatesError
from stoverify.generator import apply_generator, apply_generator_multi, gradient, hessian
from stoverify.poly import Poly, parse_poly
from stoverify.system import Mode, system_from_document

from conftest import fixture_doc


def _mode(drift, diffusion=None, nvars=None, mid="m"):
    n = nvars if nvars is not None else len(drift)
    dr = tuple(parse_poly(d, n) for d in drift)
    if diffusion is None:
        diff = tuple(() for _ in range(n))
    else:
        diff = tuple(tuple(parse_poly(g, n) for g in row) for row in diffusion)
    return Mode(id=mid, drift=dr, diffusion=diff)


class TestCalculus:
    def test_gradient_and_hessian(self):
        B = parse_poly("x1^2*x2 + x2^3", 2)
        gx, gy = gradient(B)
        assert gx == parse_poly("2*x1*x2", 2)
        assert gy == parse_poly("x1^2 + 3*x2^2", 2)
        H = hessian(B)
        assert H[0][0] == parse_poly("2*x2", 2)
        assert H[0][1] == H[1][0] == parse_poly("2*x1", 2)
        assert H[1][1] == parse_poly("6*x2", 2)


class TestSingleMode:
    def test_ornstein_uhlenbeck_quadratic(self):
        # dx = -x dt + dW per axis; B = |x|^2 gives -2|x|^2 + trace term 2.
        mode = _mode(["-x1", "-x2"], [["1", "0"], ["0", "1"]])
        B = parse_poly("x1^2 + x2^2", 2)
        assert apply_generator(B, mode) == parse_poly("-2*x1^2 - 2*x2^2 + 2", 2)

    def test_brownian_motion_square(self):
        mode = _mode(["0"], [["1"]])
        assert apply_generator(parse_poly("x1^2", 1), mode) == Poly.constant(1, 1)

    def test_pure_drift_cubic(self):
        mode = _mode(["2"])
        assert apply_generator(parse_poly("x1^3", 1), mode) == parse_poly("6*x1^2", 1)

    def test_shared_noise_cross_term(self):
        # Same Brownian driver on both axes picks up the mixed Hessian entry.
        mode = _mode(["0", "0"], [["1"], ["1"]])
        B = parse_poly("x1*x2", 2)
        assert apply_generator(B, mode) == Poly.constant(1, 2)

    def test_state_dependent_diffusion(self):
        # dx = x dW: D(x^2) = 1/2 * (x)^2 * 2 = x^2.
        mode = _mode(["0"], [["x1"]])
        assert apply_generator(parse_poly("x1^2", 1), mode) == parse_poly("x1^2", 1)

    def test_dimension_mismatch(self):
        mode = _mode(["0", "0"])
        with pytest.raises(DimensionMismatchError):
            apply_generator(parse_poly("x1^2", 1), mode)

    def test_exact_rational_coefficients(self):
        # 1/2 Tr(...) with g = 1/3 gives exactly 1/9 on B = x^2.
        mode = _mode(["0"], [["1/3"]])
        out = apply_generator(parse_poly("x1^2", 1), mode)
        assert out == parse_poly("1/9", 1)


class TestMultiMode:
    def test_rate_coupling(self, brownian2mode):
        B0 = parse_poly("x1^2", 1)
        B1 = parse_poly("2*x1^2", 1)
        # calm mode: D B0 = 1/2 * 0.25 * 2 = 0.25; rates row (-1, 1).
        out = apply_generator_multi([B0, B1], brownian2mode, 0)
        assert out == parse_poly("1/4 - x1^2 + 2*x1^2", 1)
        # noisy mode: D B1 = 1/2 * 1 * 4 x... = 2; rates row (1, -1).
        out1 = apply_generator_multi([B0, B1], brownian2mode, 1)
        assert out1 == parse_poly("2 + x1^2 - 2*x1^2", 1)

    def test_wrong_barrier_count(self, brownian2mode):
        with pytest.raises(DimensionMismatchError):
            apply_generator_multi([parse_poly("x1", 1)], brownian2mode, 0)

    def test_missing_rates(self):
        doc = fixture_doc("brownian2mode.json")
        del doc["rates"]
        sys = system_from_document(doc)
        with pytest.raises(MissingRatesError):
            apply_generator_multi([parse_poly("x1", 1), parse_poly("x1", 1)], sys, 0)
