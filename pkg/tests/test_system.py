"""System document loading, validation, and state labeling."""

import copy
import json

import numpy as np
import pytest

from conftest import fixture_doc, fixture_path
from stoverify.errors import (
    AlphabetTooLargeError,
    BadRateMatrixError,
    DimensionMismatchError,
    MissingModeError,
    MissingRatesError,
    OutOfStateSpaceError,
    OverlappingRegionsError,
    PolySyntaxError,
    SchemaError,
    UnboundedRegionError,
    UnknownPropositionError,
)
from stoverify.system import load_system, system_from_document


def base_doc():
    return copy.deepcopy(fixture_doc("det1d.json"))


class TestLoading:
    def test_fixture_loads(self, det1d):
        assert det1d.dim == 1
        assert det1d.alphabet == ("p0", "p1", "p2")
        assert det1d.regions[-1].is_complement
        assert det1d.horizon == 1.0
        assert det1d.rates is None
        assert det1d.mode_ids == ("hold",)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="cannot read"):
            load_system(str(tmp_path / "nope.json"))

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(SchemaError, match="not valid JSON"):
            load_system(str(p))

    def test_numbers_accepted_for_polynomials(self):
        doc = base_doc()
        doc["modes"][0]["drift"] = [0]
        sys = system_from_document(doc)
        assert sys.modes[0].drift[0].is_zero()


class TestSchemaErrors:
    @pytest.mark.parametrize("key", ["dimension", "state_space", "horizon", "formula", "modes", "regions"])
    def test_missing_required_field(self, key):
        doc = base_doc()
        del doc[key]
        with pytest.raises(SchemaError, match="missing field"):
            system_from_document(doc)

    def test_unknown_top_level_field(self):
        doc = base_doc()
        doc["extra"] = 1
        with pytest.raises(SchemaError, match="unknown field"):
            system_from_document(doc)

    def test_bad_dimension(self):
        for dim in [0, -1, 1.5, "2"]:
            doc = base_doc()
            doc["dimension"] = dim
            with pytest.raises(SchemaError):
                system_from_document(doc)

    def test_state_space_bounds(self):
        doc = base_doc()
        doc["state_space"] = {"lower": [1], "upper": [-1]}
        with pytest.raises(SchemaError, match="lower < upper"):
            system_from_document(doc)
        doc["state_space"] = {"lower": [0, 0], "upper": [1, 1]}
        with pytest.raises(DimensionMismatchError):
            system_from_document(doc)

    def test_bad_horizon(self):
        for h in [0, -2]:
            doc = base_doc()
            doc["horizon"] = h
            with pytest.raises(SchemaError, match="horizon"):
                system_from_document(doc)

    def test_duplicate_mode_ids(self):
        doc = base_doc()
        doc["modes"] = [doc["modes"][0], copy.deepcopy(doc["modes"][0])]
        doc["rates"] = [[-1, 1], [1, -1]]
        with pytest.raises(SchemaError, match="unique"):
            system_from_document(doc)

    def test_drift_arity(self):
        doc = base_doc()
        doc["modes"][0]["drift"] = ["0", "0"]
        with pytest.raises(DimensionMismatchError):
            system_from_document(doc)

    def test_drift_syntax_error(self):
        doc = base_doc()
        doc["modes"][0]["drift"] = ["x1 +"]
        with pytest.raises(PolySyntaxError):
            system_from_document(doc)

    def test_diffusion_shape(self):
        doc = base_doc()
        doc["noise_dimension"] = 2
        doc["modes"][0]["diffusion"] = [["1"]]
        with pytest.raises(DimensionMismatchError):
            system_from_document(doc)

    def test_region_prop_keyword_collision(self):
        doc = base_doc()
        doc["regions"][0]["prop"] = "true"
        with pytest.raises(SchemaError, match="keyword"):
            system_from_document(doc)

    def test_duplicate_region_props(self):
        doc = base_doc()
        doc["regions"][1]["prop"] = "p0"
        with pytest.raises(SchemaError, match="unique"):
            system_from_document(doc)

    def test_complement_prop_collision(self):
        doc = base_doc()
        doc["complement_prop"] = "p0"
        with pytest.raises(SchemaError, match="also declared"):
            system_from_document(doc)

    def test_alphabet_cap(self):
        doc = base_doc()
        doc["formula"] = "G !p1"
        doc["regions"] = [
            {"prop": f"r{i}", "inequalities": [f"(x1 - {i}/100)^2 - 1/100000"]}
            for i in range(17)
        ] + [{"prop": "p1", "inequalities": ["0.9 - x1", "x1 - 1"]}]
        with pytest.raises(AlphabetTooLargeError):
            system_from_document(doc)

    def test_formula_unknown_prop(self):
        doc = base_doc()
        doc["formula"] = "G !nope"
        with pytest.raises(UnknownPropositionError):
            system_from_document(doc)

    def test_formula_not_string(self):
        doc = base_doc()
        doc["formula"] = 42
        with pytest.raises(SchemaError):
            system_from_document(doc)


class TestSemanticChecks:
    def test_unbounded_region_rejected(self):
        doc = base_doc()
        doc["regions"][0]["inequalities"] = ["x1 - 0.5"]
        with pytest.raises(UnboundedRegionError):
            system_from_document(doc)

    def test_overlapping_regions_rejected(self):
        doc = base_doc()
        doc["regions"][1]["inequalities"] = ["-x1", "x1 - 1"]  # [0, 1] meets [-0.1, 0.1]
        with pytest.raises(OverlappingRegionsError):
            system_from_document(doc)

    def test_touching_regions_allowed(self):
        # Shared boundary only: interiors stay disjoint.
        doc = base_doc()
        doc["regions"][1]["inequalities"] = ["0.1 - x1", "x1 - 1"]  # [0.1, 1]
        system_from_document(doc)

    def test_rates_shape(self):
        doc = fixture_doc("brownian2mode.json")
        doc["rates"] = [[-1, 1]]
        with pytest.raises(DimensionMismatchError):
            system_from_document(doc)

    def test_rates_row_sum(self):
        doc = fixture_doc("brownian2mode.json")
        doc["rates"] = [[-1, 2], [1, -1]]
        with pytest.raises(BadRateMatrixError, match="sum to zero"):
            system_from_document(doc)

    def test_rates_negative_off_diagonal(self):
        doc = fixture_doc("brownian2mode.json")
        doc["rates"] = [[1, -1], [-1, 1]]
        with pytest.raises(BadRateMatrixError, match="negative"):
            system_from_document(doc)

    def test_state_dependent_rates_accepted(self):
        doc = fixture_doc("brownian2mode.json")
        doc["rates"] = [["-x1^2", "x1^2"], ["1", "-1"]]
        sys = system_from_document(doc)
        R = sys.rates_batch(np.array([[0.5], [2.0]]))
        assert R.shape == (2, 2, 2)
        assert R[0, 0, 1] == pytest.approx(0.25)
        assert R[1, 0, 0] == pytest.approx(-4.0)

    def test_rates_deferred_until_needed(self):
        # Loading succeeds without rates even for several modes; operations
        # that need switching behavior fail at use time.
        doc = fixture_doc("brownian2mode.json")
        del doc["rates"]
        sys = system_from_document(doc)
        with pytest.raises(MissingRatesError):
            sys.require_rates()


class TestLabeling:
    def test_priority_and_complement(self, det1d):
        assert det1d.label([0.0]) == "p0"
        assert det1d.label([0.95]) == "p1"
        assert det1d.label([0.5]) == "p2"
        assert det1d.label([-1.0]) == "p2"

    def test_label_codes_batch(self, det1d):
        X = np.array([[0.0], [0.95], [0.5]])
        codes = det1d.label_codes(X)
        assert [det1d.regions[c].prop for c in codes] == ["p0", "p1", "p2"]

    def test_out_of_box(self, det1d):
        with pytest.raises(OutOfStateSpaceError):
            det1d.label([1.5])

    def test_in_box_slack(self, det1d):
        X = np.array([[1.0 + 1e-12], [1.1]])
        assert det1d.in_box(X).tolist() == [True, False]

    def test_declaration_order_breaks_overlap_at_boundary(self):
        # With touching regions the shared point goes to the first declared one.
        doc = base_doc()
        doc["regions"][1]["inequalities"] = ["0.1 - x1", "x1 - 1"]
        sys = system_from_document(doc)
        assert sys.label([0.1]) == "p0"


class TestLookups:
    def test_region_of_union(self, det1d):
        pred = det1d.region_of(["p0", "p1"])
        assert pred.contains(np.array([0.05]))
        assert pred.contains(np.array([0.95]))
        assert not pred.contains(np.array([0.5]))

    def test_region_of_errors(self, det1d):
        with pytest.raises(UnknownPropositionError):
            det1d.region_of([])
        with pytest.raises(UnknownPropositionError):
            det1d.region_of(["zzz"])

    def test_mode_lookup(self, brownian2mode):
        assert brownian2mode.mode("calm").id == "calm"
        assert brownian2mode.mode_index("noisy") == 1
        with pytest.raises(MissingModeError):
            brownian2mode.mode("warp")

    def test_require_rates(self, det1d, brownian2mode):
        with pytest.raises(MissingRatesError):
            det1d.require_rates()
        assert len(brownian2mode.require_rates()) == 2

    def test_noise_dim(self, det1d, brownian2mode):
        assert det1d.modes[0].noise_dim == 0
        assert brownian2mode.modes[0].noise_dim == 1
