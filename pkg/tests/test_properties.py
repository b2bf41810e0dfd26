import math

import numpy as np
import pytest

from hybridclust.dissim import ALL_MEASURES, Measure, evaluate
from hybridclust.errors import ValidationError
from hybridclust.functional import IntegrationContext, gauss_bhat_closed
from hybridclust.mixture import GaussianComponent
from hybridclust.properties import (
    EXPECTED_TABLE,
    SCENARIOS_B,
    PropertyKind,
    TABLE_COLUMNS,
    check_property,
    probe_catalog,
    scenario_orderings,
    table1_matrix,
)

from helpers import make_pair


class TestCatalog:
    def test_length_is_seventeen(self):
        assert len(probe_catalog()) == 17

    def test_identical_across_reconstructions(self):
        a = probe_catalog()
        probe_catalog.cache_clear()
        b = probe_catalog()
        for pa, pb in zip(a, b):
            assert pa.k.weight == pb.k.weight
            assert np.array_equal(pa.k.density.terms[0][1].mean, pb.k.density.terms[0][1].mean)
            assert np.array_equal(pa.l.density.terms[0][1].cov, pb.l.density.terms[0][1].cov)

    def test_pair_weights_positive_and_bounded(self):
        for p in probe_catalog():
            assert p.k.weight > 0 and p.l.weight > 0
            assert p.k.weight + p.l.weight <= 1.0 + 1e-12


class TestScenarios:
    def test_all_six_present_with_unit_weights(self):
        assert sorted(SCENARIOS_B) == list("abcdef")
        for scn in SCENARIOS_B.values():
            assert sum(w for _, _, w in scn.components) == pytest.approx(1.0, abs=1e-12)

    def test_printed_parameters_spot_checks(self):
        assert SCENARIOS_B["b"].components[2] == (10.0, 0.5, 0.005)
        assert SCENARIOS_B["d"].components[2] == (3.0, 0.2, pytest.approx(1 / 3))
        assert SCENARIOS_B["e"].components[2] == SCENARIOS_B["e"].components[3]
        assert SCENARIOS_B["c"].components[2][1] == 15.0


class TestVerdicts:
    def test_klinf_passes_everything(self, qctx):
        for prop in TABLE_COLUMNS:
            v = check_property(Measure.KLINF, prop, qctx)
            assert v.passed is True, (prop, v.detail)

    def test_se_fails_equality_with_witness(self, qctx):
        v = check_property(Measure.SE, PropertyKind.EQUALITY, qctx)
        assert v.passed is False
        # the benchmark scenario with two identical components is the
        # witness: its non-identical pair scores strictly lower
        e = SCENARIOS_B["e"]
        assert evaluate(Measure.SE, e.pair(0, 1), qctx) < evaluate(
            Measure.SE, e.pair(2, 3), qctx
        )

    def test_bhat_noise_fails_outlier_passes(self, qctx):
        assert check_property(Measure.BHAT, PropertyKind.NOISE, qctx).passed is False
        assert check_property(Measure.BHAT, PropertyKind.OUTLIER, qctx).passed is True

    def test_wse_row_only_symmetry(self, qctx):
        row = {p: check_property(Measure.WSE, p, qctx).passed for p in TABLE_COLUMNS}
        assert row[PropertyKind.SYMMETRY] is True
        assert sum(row.values()) == 1

    def test_traces_are_recorded(self, qctx):
        v = check_property(Measure.KLINF, PropertyKind.MODE, qctx)
        assert len(v.limit_trace) > 0
        assert all(np.isfinite(val) for _, val in v.limit_trace)

    def test_quadrature_context_required(self, isctx):
        with pytest.raises(ValidationError):
            check_property(Measure.SE, PropertyKind.SYMMETRY, isctx)

    def test_verdicts_deterministic(self, qctx):
        a = check_property(Measure.ERR, PropertyKind.MODE, qctx)
        b = check_property(Measure.ERR, PropertyKind.MODE, qctx)
        assert a == b


def test_full_table_matches_expected(qctx):
    matrix = table1_matrix(qctx)
    for m in ALL_MEASURES:
        assert matrix[m] == EXPECTED_TABLE[m], m.display


def test_scenario_orderings_all_hold(qctx):
    results = scenario_orderings(qctx)
    assert sorted({r.label for r in results}) == list("abcdef")
    for r in results:
        assert r.holds, (r.label, r.description, r.lhs, r.rhs)


def test_monotone_likelihood_ratio_in_mean_separation(qctx):
    # unit-variance location family: dissimilarity nondecreasing in the gap
    def comp(mu):
        return GaussianComponent(np.array([mu]), np.array([[1.0]]))

    err_vals, bd_vals = [], []
    for theta in (1.0, 2.0, 3.0, 4.0):
        p = make_pair(0.5, 0.0, 1.0, 0.5, theta, 1.0)
        err_vals.append(evaluate(Measure.ERR, p, qctx))
        bd_vals.append(gauss_bhat_closed(comp(0.0), comp(theta)))
    assert err_vals == sorted(err_vals)
    assert bd_vals == sorted(bd_vals)
