"""Analytic first derivatives of the residual entries and the loss.

Each residual entry c[i0, j0] = <F[:, i0], H[:, j0]> - B[i0, j0] is
differentiated with respect to a single input coordinate x[i1, j1]
(token i1, feature j1).  The derivative splits into five named scalar
contributions when i1 hits the probe token (i0 == i1) and three otherwise;
dc_entry exposes the individual terms, grad_c and grad_L assemble them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ForwardCache, ProblemSpec, check_input, flatten_input

DIAGONAL = "diagonal"
OFF_DIAGONAL = "off_diagonal"


@dataclass(frozen=True)
class GradEntryTerms:
    """Named contributions to one residual-entry derivative.

    total is the plain left-to-right sum of the listed terms; the order is
    fixed (C1..C5, resp. C6..C8) so repeated runs accumulate identically.
    """

    case: str
    terms: tuple[tuple[str, float], ...]

    @property
    def total(self) -> float:
        acc = 0.0
        for _, value in self.terms:
            acc += value
        return acc


def _check_index(name: str, value: int, limit: int) -> None:
    if not 0 <= value < limit:
        raise IndexError(f"{name}={value} out of range [0, {limit})")


def dc_entry(cache: ForwardCache, spec: ProblemSpec,
             i0: int, j0: int, i1: int, j1: int) -> GradEntryTerms:
    """d c[i0, j0] / d x[i1, j1] as a named term table."""
    _check_index("i0", i0, spec.n)
    _check_index("i1", i1, spec.n)
    _check_index("j0", j0, spec.d)
    _check_index("j1", j1, spec.d)
    F, H, S = cache.F, cache.H, cache.S
    s = S[i0, j0]
    w1 = cache.Wsc[i0, j1]
    if i0 == i1:
        f00 = F[i0, i0]
        terms = (
            ("C1", -s * f00 * w1),
            ("C2", -s * cache.Zsc[i0, j1]),
            ("C3", f00 * H[i0, j0] * w1),
            ("C4", float(np.dot(F[:, i0] * cache.XW[:, j1], H[:, j0]))),
            ("C5", f00 * spec.V[j1, j0]),
        )
        return GradEntryTerms(case=DIAGONAL, terms=terms)
    f01 = F[i1, i0]
    terms = (
        ("C6", -s * f01 * w1),
        ("C7", f01 * H[i1, j0] * w1),
        ("C8", f01 * spec.V[j1, j0]),
    )
    return GradEntryTerms(case=OFF_DIAGONAL, terms=terms)


def grad_c(cache: ForwardCache, spec: ProblemSpec, i0: int, j0: int) -> np.ndarray:
    """All partials of c[i0, j0], flattened in the canonical order.

    Entry k = i1*d + j1 equals dc_entry(..., i1, j1).total.
    """
    _check_index("i0", i0, spec.n)
    _check_index("j0", j0, spec.d)
    F, H = cache.F, cache.H
    s = cache.S[i0, j0]
    f = F[:, i0]
    # Off-diagonal shape holds at every token; the probe token i0 needs the
    # two extra softmax-coupling terms (C2 and C4).
    M = f[:, None] * ((H[:, j0] - s)[:, None] * cache.Wsc[i0, None, :]
                      + spec.V[None, :, j0])
    M[i0, :] += -s * cache.Zsc[i0, :] + cache.XW.T @ (f * H[:, j0])
    return M.reshape(-1)


def grad_f_direction(cache: ForwardCache, spec: ProblemSpec,
                     i0: int, i1: int, j1: int) -> np.ndarray:
    """d F[:, i0] / d x[i1, j1]; entries sum to zero exactly in theory."""
    _check_index("i0", i0, spec.n)
    _check_index("i1", i1, spec.n)
    _check_index("j1", j1, spec.d)
    f = cache.F[:, i0]
    p = np.zeros(spec.n)
    p[i1] = cache.Wsc[i0, j1]
    if i0 == i1:
        p = p + cache.XW[:, j1]
    return f * p - f * float(np.dot(f, p))


def grad_L(cache: ForwardCache, spec: ProblemSpec, X) -> np.ndarray:
    """Loss gradient 2 * sum_{i0,j0} c[i0,j0] * grad_c + 2*gamma*vec(X)."""
    X = check_input(spec, X)
    acc = np.zeros(spec.n * spec.d)
    for i0 in range(spec.n):
        for j0 in range(spec.d):
            acc += cache.C[i0, j0] * grad_c(cache, spec, i0, j0)
    return 2.0 * acc + 2.0 * spec.gamma * flatten_input(X)
