import numpy as np
import pytest

from attninv.analysis import (
    bound_suite,
    choose_gamma,
    effective_bound_constant,
    lipschitz_probe,
    psd_floor,
)
from attninv.hessian import hessian_L
from attninv.model import ProblemSpec, forward_cache, synthesize_target
from conftest import bounded_instance, bounded_x


def test_r_eff_is_at_least_one_and_tracks_norms():
    spec, X = bounded_instance(0, 3, 2)
    R = effective_bound_constant(spec, X)
    assert R >= 1.0
    assert R >= np.linalg.norm(X, 2)
    assert R * R >= np.abs(spec.B).max()


def test_bound_suite_zero_input():
    spec, _ = bounded_instance(1, 4, 2)
    X0 = np.zeros((2, 4))
    rep = bound_suite(forward_cache(spec, X0), spec, X0)
    assert rep.passed
    by_name = {c.name: c for c in rep.checks}
    assert by_name["softmax_column_norm"].lhs == pytest.approx(1 / 2)  # 1/sqrt(n)


def test_bound_suite_passes_on_seeded_instance():
    spec, X = bounded_instance(0, 4, 3)
    rep = bound_suite(forward_cache(spec, X), spec, X)
    assert rep.passed, rep.failures()


def test_bound_suite_adversarial_scale_still_passes():
    spec, X = bounded_instance(9, 3, 2)
    X3 = X * (3.6 / max(np.linalg.norm(X, 2), 1e-12))  # spectral norm 3 * 1.2
    rep = bound_suite(forward_cache(spec, X3), spec, X3)
    assert rep.r_eff >= 3.5
    assert rep.passed, rep.failures()


def test_psd_floor_at_truth_is_gauss_newton():
    spec, X = bounded_instance(4, 3, 2)
    made = synthesize_target(spec.W, spec.V, X)
    rep = psd_floor(made, X)
    assert rep.lambda_min >= -1e-8
    assert rep.passed and rep.hessian_c_passed


def test_psd_floor_scalar_case():
    spec = ProblemSpec(1, 1, [[0.2]], [[1.5]], [[0.7]])
    rep = psd_floor(spec, [[0.9]])
    assert rep.lambda_min == pytest.approx(2 * 1.5**2, abs=1e-12)
    assert rep.lambda_min >= 0.0 >= rep.floor
    assert rep.passed


def test_psd_floor_seeded():
    spec, X = bounded_instance(0, 3, 2)
    rep = psd_floor(spec, X)
    assert rep.passed and rep.hessian_c_passed


def test_choose_gamma_formula_and_positivity():
    assert choose_gamma(1, 1, 1.0) == 72.0
    assert choose_gamma(2, 2, 1.0) == 288.0
    with pytest.raises(ValueError):
        choose_gamma(1, 1, 0.5)
    spec, X = bounded_instance(0, 3, 2)
    gamma = choose_gamma(3, 2, effective_bound_constant(spec, X))
    reg = spec.with_gamma(gamma)
    H = hessian_L(forward_cache(reg, X), reg, X)
    assert np.linalg.eigvalsh(0.5 * (H + H.T)).min() > 0


def test_lipschitz_identical_pair_reports_zero():
    spec, X = bounded_instance(2, 3, 2)
    rep = lipschitz_probe(spec, [(X, X)])
    assert rep.passed
    assert all(c.lhs == 0.0 for c in rep.checks)


def test_lipschitz_value_ratio_never_exceeds_value_norm():
    spec, X = bounded_instance(3, 3, 2)
    for s in range(5):
        Y = bounded_x(100 + s, 3, 2)
        cx = forward_cache(spec, X)
        cy = forward_cache(spec, Y)
        dist = np.linalg.norm(X - Y)
        ratio = np.linalg.norm(cx.H - cy.H, axis=0).max() / dist
        assert ratio <= np.linalg.norm(spec.V, 2) + 1e-12


def test_lipschitz_probe_passes_and_labels_kinds():
    spec, X = bounded_instance(0, 3, 2)
    pairs = [(X, bounded_x(41, 3, 2)), (X, bounded_x(42, 3, 2))]
    rep = lipschitz_probe(spec, pairs)
    assert rep.passed, rep.failures()
    kinds = {c.kind for c in rep.checks}
    assert kinds == {"theorem", "smoke"}
