"""Empirical verification of the magnitude, curvature, and smoothness
guarantees the solver relies on.

Explicit-constant checks are provable under the bounded-parameter
assumption: a failure means an implementation bug.  Big-O checks use a
fixed generous constant (C = 200, and the 72 of the PSD floor doubled for
the loss convention) and are smoke detectors, not theorem tests; every
report entry is labeled with its kind.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gradient, hessian
from .model import ForwardCache, ProblemSpec, check_input, forward_cache

BIG_O_CONSTANT = 200.0
PSD_FLOOR_CONSTANT = 72.0


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool
    kind: str = "theorem"  # "theorem" (explicit constant) or "smoke" (big-O)


@dataclass(frozen=True)
class BoundReport:
    r_eff: float
    checks: tuple[BoundCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[BoundCheck]:
        return [c for c in self.checks if not c.passed]


def effective_bound_constant(spec: ProblemSpec, X) -> float:
    """Measured stand-in for the bound constant: the largest of 1, the
    spectral norms of W, V, X, and sqrt(max |B|)."""
    X = check_input(spec, X)
    return float(max(
        1.0,
        np.linalg.norm(spec.W, 2),
        np.linalg.norm(spec.V, 2),
        np.linalg.norm(X, 2),
        float(np.sqrt(np.abs(spec.B).max())) if spec.B.size else 1.0,
    ))


def _mk(name: str, lhs: float, rhs: float, kind: str = "theorem") -> BoundCheck:
    return BoundCheck(name=name, lhs=float(lhs), rhs=float(rhs),
                      passed=bool(lhs <= rhs), kind=kind)


def bound_suite(cache: ForwardCache, spec: ProblemSpec, X) -> BoundReport:
    """Evaluate every explicit-constant magnitude bound at X.

    Each check records the worst measured value across all indices of its
    family against the bound evaluated at the instance's effective
    constant.
    """
    X = check_input(spec, X)
    R = effective_bound_constant(spec, X)
    n, d = spec.n, spec.d
    sqrt_nd = float(np.sqrt(n * d))
    checks: list[BoundCheck] = []

    checks.append(_mk("softmax_column_norm", np.linalg.norm(cache.F, axis=0).max(), 1.0))
    checks.append(_mk("value_column_norm", np.linalg.norm(cache.H, axis=0).max(), R**2))
    checks.append(_mk("residual_abs", np.abs(cache.C).max(), 2.0 * R**2))
    checks.append(_mk("weighted_input_column_norm",
                      np.linalg.norm(cache.XW, axis=0).max(), R**2))
    checks.append(_mk("score_coeff_abs", np.abs(cache.Wsc).max(), R**2))
    checks.append(_mk("softmax_score_abs", np.abs(cache.Zsc).max(), R**2))
    checks.append(_mk("output_abs", np.abs(cache.S).max(), R**2))

    worst_dir = 0.0
    worst_full = 0.0
    for i0 in range(n):
        sq = 0.0
        for i1 in range(n):
            for j1 in range(d):
                norm = float(np.linalg.norm(
                    gradient.grad_f_direction(cache, spec, i0, i1, j1)))
                worst_dir = max(worst_dir, norm)
                sq += norm * norm
        worst_full = max(worst_full, float(np.sqrt(sq)))
    checks.append(_mk("softmax_grad_direction_norm", worst_dir, 4.0 * R**2))
    checks.append(_mk("softmax_grad_frobenius", worst_full, 4.0 * sqrt_nd * R**2))

    worst_entry = 0.0
    worst_vec = 0.0
    for i0 in range(n):
        for j0 in range(d):
            g = gradient.grad_c(cache, spec, i0, j0)
            worst_entry = max(worst_entry, float(np.abs(g).max()))
            worst_vec = max(worst_vec, float(np.linalg.norm(g)))
    checks.append(_mk("residual_grad_entry_abs", worst_entry, 5.0 * R**4))
    checks.append(_mk("residual_grad_norm", worst_vec, 5.0 * sqrt_nd * R**4))

    worst_blocks = {1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0, 5: 0.0}
    for i0 in range(n):
        for j0 in range(d):
            worst_blocks[1] = max(worst_blocks[1], np.linalg.norm(
                hessian.block_case1(cache, spec, i0, j0), 2))
            for i2 in range(n):
                if i2 == i0:
                    continue
                worst_blocks[2] = max(worst_blocks[2], np.linalg.norm(
                    hessian.block_case2(cache, spec, i0, j0, i2), 2))
                worst_blocks[3] = max(worst_blocks[3], np.linalg.norm(
                    hessian.block_case3(cache, spec, i0, j0, i2), 2))
                worst_blocks[4] = max(worst_blocks[4], np.linalg.norm(
                    hessian.block_case4(cache, spec, i0, j0, i2), 2))
                for i1 in range(n):
                    if i1 in (i0, i2):
                        continue
                    worst_blocks[5] = max(worst_blocks[5], np.linalg.norm(
                        hessian.block_case5(cache, spec, i0, j0, i1, i2), 2))
    block_bounds = {
        1: 23.0 * R**6 + R**5 + 12.0 * R**3,
        2: 11.0 * R**6 + 6.0 * R**3,
        3: 11.0 * R**6 + 6.0 * R**3,
        4: 5.0 * R**6 + 4.0 * R**3,
        5: 4.0 * R**6 + 2.0 * R**3,
    }
    for case in (1, 2, 3, 4, 5):
        if spec.n == 1 and case > 1:
            continue
        if spec.n == 2 and case == 5:
            continue
        checks.append(_mk(f"hessian_block{case}_norm",
                          worst_blocks[case], block_bounds[case]))

    return BoundReport(r_eff=R, checks=tuple(checks))


@dataclass(frozen=True)
class PsdReport:
    lambda_min: float
    floor: float
    passed: bool
    r_eff: float
    hessian_c_norm_max: float
    hessian_c_bound: float
    hessian_c_passed: bool


def psd_floor(spec: ProblemSpec, X) -> PsdReport:
    """Lower spectral bound check for the unregularized loss Hessian, plus
    the per-residual Hessian norm check at twice the single-entry bound
    (the doubling matches the loss convention)."""
    X = check_input(spec, X)
    base = spec.with_gamma(0.0)
    cache = forward_cache(base, X)
    R = effective_bound_constant(spec, X)
    H = hessian.hessian_L(cache, base, X)
    try:
        lam_min = float(np.linalg.eigvalsh(0.5 * (H + H.T)).min())
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolve failed: {exc}") from exc
    floor = -2.0 * PSD_FLOOR_CONSTANT * spec.n * spec.d * R**8
    worst_c = 0.0
    for i0 in range(spec.n):
        for j0 in range(spec.d):
            worst_c = max(worst_c, float(np.linalg.norm(
                hessian.hessian_c(cache, base, i0, j0), 2)))
    c_bound = 2.0 * 36.0 * R**6
    return PsdReport(
        lambda_min=lam_min,
        floor=floor,
        passed=bool(lam_min >= floor),
        r_eff=R,
        hessian_c_norm_max=worst_c,
        hessian_c_bound=c_bound,
        hessian_c_passed=bool(worst_c <= c_bound),
    )


def choose_gamma(n: int, d: int, r_eff: float) -> float:
    """Regularization weight 72 * n * d * r_eff^8, large enough that the
    doubled identity term dominates the PSD floor."""
    if r_eff < 1.0:
        raise ValueError("r_eff must be at least 1")
    return PSD_FLOOR_CONSTANT * n * d * float(r_eff) ** 8


def lipschitz_probe(spec: ProblemSpec, pairs) -> BoundReport:
    """Lipschitz ratio checks on concrete pairs (X, Y).

    Explicit-constant ratios (softmax, residual, value, score, averaged
    score) are theorem checks; the derivative and Hessian ratios carry the
    generous big-O constant and are labeled smoke.
    """
    n, d = spec.n, spec.d
    sqrt_nd = float(np.sqrt(n * d))
    checks: list[BoundCheck] = []
    r_eff = 1.0
    base = spec.with_gamma(0.0)
    for idx, (X, Y) in enumerate(pairs):
        X = check_input(spec, X)
        Y = check_input(spec, Y)
        dist = float(np.linalg.norm(X - Y))
        R = max(effective_bound_constant(spec, X),
                effective_bound_constant(spec, Y))
        r_eff = max(r_eff, R)
        if dist == 0.0:
            # identical points: every ratio is zero by convention
            dist = 1.0
        cx = forward_cache(base, X)
        cy = forward_cache(base, Y)
        tag = f"pair{idx}"
        checks.append(_mk(f"{tag}_softmax_ratio",
                          np.linalg.norm(cx.F - cy.F, axis=0).max() / dist,
                          4.0 * sqrt_nd * R**2))
        checks.append(_mk(f"{tag}_residual_ratio",
                          np.abs(cx.C - cy.C).max() / dist,
                          5.0 * sqrt_nd * R**4))
        checks.append(_mk(f"{tag}_value_ratio",
                          np.linalg.norm(cx.H - cy.H, axis=0).max() / dist,
                          R))
        checks.append(_mk(f"{tag}_score_coeff_ratio",
                          np.abs(cx.Wsc - cy.Wsc).max() / dist,
                          R))
        checks.append(_mk(f"{tag}_softmax_score_ratio",
                          np.abs(cx.Zsc - cy.Zsc).max() / dist,
                          5.0 * sqrt_nd * R**4))
        worst_gc = 0.0
        worst_hc = 0.0
        for i0 in range(n):
            for j0 in range(d):
                worst_gc = max(worst_gc, float(np.abs(
                    gradient.grad_c(cx, base, i0, j0)
                    - gradient.grad_c(cy, base, i0, j0)).max()))
                worst_hc = max(worst_hc, float(np.abs(
                    hessian.hessian_c(cx, base, i0, j0)
                    - hessian.hessian_c(cy, base, i0, j0)).max()))
        checks.append(_mk(f"{tag}_residual_grad_ratio", worst_gc / dist,
                          BIG_O_CONSTANT * sqrt_nd * R**6, kind="smoke"))
        checks.append(_mk(f"{tag}_residual_hess_ratio", worst_hc / dist,
                          BIG_O_CONSTANT * sqrt_nd * R**8, kind="smoke"))
        hess_diff = np.linalg.norm(
            hessian.hessian_L(cx, base, X) - hessian.hessian_L(cy, base, Y))
        checks.append(_mk(f"{tag}_loss_hessian_ratio", hess_diff / dist,
                          BIG_O_CONSTANT * float(n)**3.5 * float(d)**3.5 * R**10,
                          kind="smoke"))
    return BoundReport(r_eff=r_eff, checks=tuple(checks))
