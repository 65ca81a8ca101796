"""Predicate membership, conservative cell classification, and point generation."""

import numpy as np
import pytest

from stoverify.errors import SchemaError
from stoverify.poly import CellGrid, parse_poly
from stoverify.predicates import (
    AndPred,
    BoxPred,
    NotPred,
    OrPred,
    PolyLeq,
    grid_points,
    halton_in_box,
    poly_to_smt,
    sample_in_pred,
)


def _disk(r="1"):
    return PolyLeq(parse_poly(f"x1^2 + x2^2 - {r}", 2))


class TestMembership:
    def test_polyleq_boundary_inside(self):
        p = PolyLeq(parse_poly("x1^2 - 1", 1))
        assert p.contains([1.0]) and p.contains([-1.0]) and p.contains([0.0])
        assert not p.contains([1.0001])

    def test_box(self):
        b = BoxPred((0.0, 0.0), (1.0, 2.0))
        assert b.contains([0.0, 2.0])
        assert not b.contains([1.1, 1.0])
        with pytest.raises(ValueError):
            BoxPred((0.0,), (1.0, 2.0))
        with pytest.raises(ValueError):
            BoxPred((1.0,), (0.0,))

    def test_boolean_combinations(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-2, 2, size=(500, 2))
        a = _disk("1")
        b = BoxPred((-0.5, -2.0), (0.5, 2.0))
        band_and = AndPred((a, b)).contains_batch(X)
        assert (band_and == (a.contains_batch(X) & b.contains_batch(X))).all()
        either = OrPred((a, b)).contains_batch(X)
        assert (either == (a.contains_batch(X) | b.contains_batch(X))).all()
        neg = NotPred(a).contains_batch(X)
        assert (neg == ~a.contains_batch(X)).all()

    def test_empty_combination_rejected(self):
        with pytest.raises(ValueError):
            AndPred(())
        with pytest.raises(ValueError):
            OrPred(())

    def test_mixed_dimension_rejected(self):
        with pytest.raises(ValueError):
            AndPred((PolyLeq(parse_poly("x1", 1)), _disk()))

    def test_violation_scores(self):
        p = PolyLeq(parse_poly("x1^2 - 1", 1))
        X = np.array([[0.0], [1.0], [2.0]])
        v = p.violation_batch(X)
        assert v[0] == v[1] == 0.0 and v[2] > 0.0
        nb = NotPred(p).violation_batch(X)
        assert nb[0] == nb[1] == 1.0 and nb[2] == 0.0


class TestCellStatus:
    """Conservative three-valued classification drives everything the verifier
    quantifies over, so definite/possible must bracket true membership."""

    @pytest.mark.parametrize(
        "pred",
        [
            _disk("1"),
            BoxPred((-0.35, -1.2), (0.61, 0.4)),
            NotPred(_disk("0.5")),
            AndPred((_disk("1.5"), NotPred(_disk("0.3")))),
            OrPred((BoxPred((-1.5, -1.5), (-0.5, -0.5)), _disk("0.25"))),
        ],
    )
    def test_bracketing(self, pred):
        grid = CellGrid([-2.0, -2.0], [2.0, 2.0], [23, 23])
        definite, possible = pred.cell_status(grid)
        assert definite.shape == possible.shape == grid.shape
        assert not (definite & ~possible).any()
        rng = np.random.default_rng(11)
        centers = grid.centers_matrix()
        for _ in range(8):
            offs = rng.uniform(-1, 1, size=centers.shape) * grid.halfwidth
            pts = centers + offs
            member = pred.contains_batch(pts)
            # definite cells contain only members; members only in possible cells
            assert member[definite.reshape(-1)].all()
            assert not member[~possible.reshape(-1)].any()

    def test_disk_counts_sane(self):
        grid = CellGrid([-2.0, -2.0], [2.0, 2.0], [40, 40])
        definite, possible = _disk("1").cell_status(grid)
        cell_area = 0.1 * 0.1
        assert definite.sum() * cell_area <= np.pi <= possible.sum() * cell_area


class TestSmt:
    def test_polyleq(self):
        p = PolyLeq(parse_poly("x1^2 - 1/2", 1))
        assert p.to_smt(["x1"]) == "(<= (+ (* 1 x1 x1) (/ (- 1) 2)) 0)"

    def test_box_and_not(self):
        b = BoxPred((-1.0, 0.0), (1.0, 2.0))
        s = b.to_smt(["x1", "x2"])
        assert s == (
            "(and (>= x1 (- 1)) (<= x1 1) (>= x2 0) (<= x2 2))"
        )
        assert NotPred(b).to_smt(["x1", "x2"]) == f"(not {s})"

    def test_zero_poly(self):
        assert poly_to_smt(parse_poly("x1 - x1", 1), ["x1"]) == "0"

    def test_name_count_checked(self):
        with pytest.raises(ValueError):
            poly_to_smt(parse_poly("x1", 2), ["x1"])

    def test_float_constants_exact_enough(self):
        s = PolyLeq(parse_poly("x1 - 0.1", 1)).to_smt(["x1"])
        assert "(/ (- 1) 10)" in s


class TestPointGeneration:
    def test_halton_deterministic(self):
        a = halton_in_box([-1, -1], [1, 1], 64)
        b = halton_in_box([-1, -1], [1, 1], 64)
        assert (a == b).all()
        assert a.shape == (64, 2)
        assert (a >= -1).all() and (a <= 1).all()

    def test_halton_skip_is_suffix(self):
        full = halton_in_box([0], [1], 20)
        tail = halton_in_box([0], [1], 12, skip=8)
        assert np.allclose(full[8:], tail)

    def test_sample_in_pred(self):
        pred = _disk("1")
        pts = sample_in_pred(pred, [-2, -2], [2, 2], 100)
        assert pts.shape == (100, 2)
        assert pred.contains_batch(pts).all()
        again = sample_in_pred(pred, [-2, -2], [2, 2], 100)
        assert (pts == again).all()

    def test_sample_in_empty_pred(self):
        empty = PolyLeq(parse_poly("x1^2 + 1", 1))
        with pytest.raises(SchemaError, match="region may be empty"):
            sample_in_pred(empty, [-1], [1], 5, max_draw=4096)

    def test_grid_points(self):
        pts = grid_points([-1, 0], [1, 2], 3)
        assert pts.shape == (9, 2)
        as_rows = {tuple(r) for r in pts.tolist()}
        assert (-1.0, 0.0) in as_rows and (1.0, 2.0) in as_rows and (0.0, 1.0) in as_rows
