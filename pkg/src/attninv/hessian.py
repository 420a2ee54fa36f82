"""Analytic second derivatives of the residual entries and the loss.

The mixed partial d^2 c[i0, j0] / dx[i1, j1] dx[i2, j2] splits into five
index cases.  Two independent realizations are kept deliberately:

  * d2c_entry sums the scalar term tables (D terms for case 1, E for
    case 2, F for case 4, G for case 5; case 3 is case 2 with the
    derivative pair swapped);
  * block_case1..block_case5 build the same d x d blocks from outer
    products of cached vectors.

Tests pin the two realizations against each other at 1e-10 and both
against finite differences.  A handful of terms carry factors that are
easy to mistranscribe (softmax entries at the probe token versus the
derivative token, paired coefficients, a symmetric weight combination);
comments keyed to the term index record the algebraic constraint that
fixes each one, and the finite-difference suite is the arbiter.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .gradient import grad_c
from .model import ForwardCache, ProblemSpec, check_input, dense_cap


class HessCase(IntEnum):
    """Index case of one mixed partial; classification is total."""

    CASE1 = 1  # i0 == i1 == i2
    CASE2 = 2  # i0 == i1 != i2
    CASE3 = 3  # i0 != i1, i0 == i2
    CASE4 = 4  # i0 != i1 == i2
    CASE5 = 5  # i0, i1, i2 pairwise distinct


def classify_case(i0: int, i1: int, i2: int) -> HessCase:
    if i0 == i1:
        return HessCase.CASE1 if i0 == i2 else HessCase.CASE2
    if i0 == i2:
        return HessCase.CASE3
    return HessCase.CASE4 if i1 == i2 else HessCase.CASE5


def _check_index(name: str, value: int, limit: int) -> None:
    if not 0 <= value < limit:
        raise IndexError(f"{name}={value} out of range [0, {limit})")


def _d2c_case1(cache: ForwardCache, spec: ProblemSpec,
               i0: int, j0: int, j1: int, j2: int) -> float:
    F, H, V = cache.F, cache.H, spec.V
    f = F[:, i0]
    h = H[:, j0]
    s = cache.S[i0, j0]
    f00 = F[i0, i0]
    h00 = H[i0, j0]
    w1, w2 = cache.Wsc[i0, j1], cache.Wsc[i0, j2]
    z1, z2 = cache.Zsc[i0, j1], cache.Zsc[i0, j2]
    t1, t2 = cache.XW[i0, j1], cache.XW[i0, j2]
    g1, g2 = cache.XW[:, j1], cache.XW[:, j2]
    fg1h = float(np.dot(f * g1, h))
    fg2h = float(np.dot(f * g2, h))
    terms = (
        2.0 * s * f00 * f00 * w2 * w1,                                  # D1
        2.0 * f00 * s * z2 * w1 + 2.0 * f00 * s * z1 * w2,              # D2
        -f00 * f00 * h00 * w2 * w1,                                     # D3
        -f00 * fg2h * w1 - f00 * fg1h * w2,                             # D4
        -f00 * f00 * (V[j2, j0] * w1 + V[j1, j0] * w2),                 # D5
        -s * f00 * w2 * w1,                                             # D6
        -s * f00 * (t2 * w1 + t1 * w2),                                 # D7
        -s * f00 * (spec.W[j1, j2] + spec.W[j2, j1]),                   # D8
        s * z2 * z1,                                                    # D9
        -f00 * h00 * (w2 * z1 + w1 * z2),                               # D10
        -fg2h * z1 - fg1h * z2,                                         # D11
        -f00 * (V[j2, j0] * z1 + V[j1, j0] * z2),                       # D12
        s * z1 * z2,              # D13: no softmax factor here; D9 + D13
                                  # is the cross term of the two averaged
                                  # scores, 2*s*z1*z2 total (FD-pinned)
        -s * float(np.dot(f * g2, g1)),                                 # D14
        -f00 * f00 * h00 * w2 * w1,                                     # D15
        f00 * h00 * w2 * w1,                                            # D16
        f00 * h00 * (t2 * w1 + t1 * w2),                                # D17
        f00 * (V[j2, j0] * w1 + V[j1, j0] * w2),                        # D18
        f00 * h00 * (spec.W[j1, j2] + spec.W[j2, j1]),  # D19: h00 is entry
                                  # i0 of value column j0
        float(np.dot(f * g2 * g1, h)),                                  # D20
        f00 * (t2 * V[j1, j0] + t1 * V[j2, j0]),                        # D21
    )
    acc = 0.0
    for t in terms:
        acc += t
    return acc


def _d2c_case2(cache: ForwardCache, spec: ProblemSpec,
               i0: int, j0: int, j1: int, i2: int, j2: int) -> float:
    F, H, V = cache.F, cache.H, spec.V
    f = F[:, i0]
    h = H[:, j0]
    s = cache.S[i0, j0]
    f00 = F[i0, i0]
    h00 = H[i0, j0]
    f02 = F[i2, i0]
    h02 = H[i2, j0]
    w1, w2 = cache.Wsc[i0, j1], cache.Wsc[i0, j2]
    z1 = cache.Zsc[i0, j1]
    t21 = cache.XW[i2, j1]
    fg1h = float(np.dot(f * cache.XW[:, j1], h))
    terms = (
        2.0 * s * f02 * w2 * f00 * w1,                                  # E1
        -f02 * h02 * w2 * f00 * w1,       # E2: coefficient 1; the matching
                                          # cross term with h00 arrives
                                          # separately as E10 (FD-pinned)
        -f02 * V[j2, j0] * f00 * w1,                                    # E3
        s * f02 * w2 * z1,                                              # E4
        -f02 * h02 * w2 * z1,                                           # E5
        -f02 * V[j2, j0] * z1,                                          # E6
        s * z1 * f02 * w2,                # E7: softmax entry i2 (not the
                                          # probe entry); E4 + E7 =
                                          # 2*s*f02*w2*z1
        -s * f02 * t21 * w2,              # E8: token column i2 and softmax
                                          # entry i2, both from the z1
                                          # derivative
        -s * f02 * spec.W[j2, j1],        # E9: softmax entry i2, as in E8
        -f00 * f02 * w2 * h00 * w1,                                     # E10
        -fg1h * f02 * w2,                                               # E11
        f02 * h02 * t21 * w2,                                           # E12
        f02 * h02 * spec.W[j2, j1],                                     # E13
        f02 * t21 * V[j2, j0],                                          # E14
        -f00 * f02 * w2 * V[j1, j0],                                    # E15
    )
    acc = 0.0
    for t in terms:
        acc += t
    return acc


def _d2c_case4(cache: ForwardCache, spec: ProblemSpec,
               i0: int, j0: int, i1: int, j1: int, j2: int) -> float:
    V = spec.V
    s = cache.S[i0, j0]
    f01 = cache.F[i1, i0]
    h01 = cache.H[i1, j0]
    w1, w2 = cache.Wsc[i0, j1], cache.Wsc[i0, j2]
    terms = (
        2.0 * s * f01 * f01 * w2 * w1,                                  # F1
        -2.0 * f01 * f01 * h01 * w2 * w1, # F2: coefficient 2, one copy
                                          # from each derivative route
                                          # (FD-pinned)
        -f01 * f01 * (V[j2, j0] * w1 + V[j1, j0] * w2),                 # F3
        -s * f01 * w1 * w2,                                             # F4
        f01 * w1 * w2 * h01,                                            # F5
        V[j2, j0] * f01 * w1 + V[j1, j0] * f01 * w2,                    # F6
    )
    acc = 0.0
    for t in terms:
        acc += t
    return acc


def _d2c_case5(cache: ForwardCache, spec: ProblemSpec,
               i0: int, j0: int, i1: int, j1: int, i2: int, j2: int) -> float:
    s = cache.S[i0, j0]
    f01, f02 = cache.F[i1, i0], cache.F[i2, i0]
    w1, w2 = cache.Wsc[i0, j1], cache.Wsc[i0, j2]
    terms = (
        2.0 * s * f01 * f02 * w2 * w1,                                  # G1
        -f01 * f02 * w2 * w1 * (cache.H[i2, j0] + cache.H[i1, j0]),     # G2
        -f01 * f02 * (spec.V[j2, j0] * w1 + spec.V[j1, j0] * w2),       # G3
    )
    acc = 0.0
    for t in terms:
        acc += t
    return acc


def d2c_entry(cache: ForwardCache, spec: ProblemSpec, i0: int, j0: int,
              i1: int, j1: int, i2: int, j2: int) -> float:
    """d^2 c[i0, j0] / dx[i1, j1] dx[i2, j2] via the per-case term tables."""
    _check_index("i0", i0, spec.n)
    _check_index("i1", i1, spec.n)
    _check_index("i2", i2, spec.n)
    _check_index("j0", j0, spec.d)
    _check_index("j1", j1, spec.d)
    _check_index("j2", j2, spec.d)
    case = classify_case(i0, i1, i2)
    if case is HessCase.CASE1:
        return _d2c_case1(cache, spec, i0, j0, j1, j2)
    if case is HessCase.CASE2:
        return _d2c_case2(cache, spec, i0, j0, j1, i2, j2)
    if case is HessCase.CASE3:
        # symmetry of second derivatives: swap the derivative pair
        return _d2c_case2(cache, spec, i0, j0, j2, i1, j1)
    if case is HessCase.CASE4:
        return _d2c_case4(cache, spec, i0, j0, i1, j1, j2)
    return _d2c_case5(cache, spec, i0, j0, i1, j1, i2, j2)


def _case1_vectors(cache: ForwardCache, spec: ProblemSpec, i0: int, j0: int):
    f = cache.F[:, i0]
    h = cache.H[:, j0]
    wv = cache.Wsc[i0, :]          # W X[:, i0]
    zv = cache.Zsc[i0, :]          # W^T X f
    tv = cache.XW[i0, :]           # W^T X[:, i0]
    vc = spec.V[:, j0]
    return f, h, wv, zv, tv, vc


def block_case1(cache: ForwardCache, spec: ProblemSpec, i0: int, j0: int) -> np.ndarray:
    """Diagonal probe block: all three indices on token i0."""
    _check_index("i0", i0, spec.n)
    _check_index("j0", j0, spec.d)
    f, h, wv, zv, tv, vc = _case1_vectors(cache, spec, i0, j0)
    s = cache.S[i0, j0]
    f00 = cache.F[i0, i0]
    h00 = cache.H[i0, j0]
    W = spec.W
    Gm = cache.XW                  # columns are X^T W[:, j]
    m = Gm.T @ (f * h)             # m[j] = <f o XW[:, j], h>
    ww = np.outer(wv, wv)
    wz = np.outer(wv, zv)
    B = 2.0 * s * f00 * f00 * ww                            # B1
    B += 2.0 * f00 * s * (wz + wz.T)                        # B2
    B += -(f00 * f00) * h00 * ww                            # B3
    B += -f00 * (np.outer(m, wv) + np.outer(wv, m))         # B4
    B += -(f00 * f00) * (np.outer(wv, vc) + np.outer(vc, wv))  # B5
    B += -s * f00 * ww                                      # B6
    B += -s * f00 * (np.outer(wv, tv) + np.outer(tv, wv))   # B7
    B += -s * f00 * (W + W.T)      # B8: symmetric combination; an
                                   # antisymmetric W form cannot match
                                   # the symmetric D8 entries
    B += s * np.outer(zv, zv)                               # B9
    B += -f00 * h00 * (wz.T + wz)                           # B10
    B += -(np.outer(zv, m) + np.outer(m, zv))  # B11: both summands carry
                                   # minus, matching D11
    B += -f00 * (np.outer(zv, vc) + np.outer(vc, zv))  # B12: both
                                   # summands carry minus, matching D12
    B += s * np.outer(zv, zv)      # B13: no softmax factor, mirroring D13
    B += -s * (Gm.T * f) @ Gm                               # B14
    B += -(f00 * f00) * h00 * ww                            # B15
    B += f00 * h00 * ww                                     # B16
    B += f00 * h00 * (np.outer(wv, tv) + np.outer(tv, wv))  # B17
    B += f00 * (np.outer(wv, vc) + np.outer(vc, wv))  # B18: value COLUMN
                                   # j0 on both sides, matching D18
    B += f00 * h00 * (W + W.T)                              # B19
    B += (Gm.T * (f * h)) @ Gm     # B20: weight factor on both sides
                                   # (entry = <f o g_j1 o g_j2, h>, D20)
    B += f00 * (np.outer(tv, vc) + np.outer(vc, tv))        # B21
    return B


def block_case2(cache: ForwardCache, spec: ProblemSpec,
                i0: int, j0: int, i2: int) -> np.ndarray:
    """Probe-row block: first derivative on token i0, second on i2 != i0."""
    _check_index("i0", i0, spec.n)
    _check_index("i2", i2, spec.n)
    _check_index("j0", j0, spec.d)
    if i2 == i0:
        raise ValueError("block_case2 requires i2 != i0")
    f, h, wv, zv, _, vc = _case1_vectors(cache, spec, i0, j0)
    s = cache.S[i0, j0]
    f00 = cache.F[i0, i0]
    h00 = cache.H[i0, j0]
    f02 = cache.F[i2, i0]
    h02 = cache.H[i2, j0]
    t2v = cache.XW[i2, :]          # W^T X[:, i2]
    m = cache.XW.T @ (f * h)
    ww = np.outer(wv, wv)
    zw = np.outer(zv, wv)
    J = 2.0 * s * f02 * f00 * ww                            # J1
    J += -f02 * h02 * f00 * ww     # J2: coefficient 1, as in E2
    J += -f02 * f00 * np.outer(wv, vc)                      # J3
    J += s * f02 * zw                                       # J4
    J += -f02 * h02 * zw                                    # J5
    J += -f02 * np.outer(zv, vc)                            # J6
    J += s * f02 * zw              # J7: softmax entry i2, as in E7
    J += -s * f02 * np.outer(t2v, wv)  # J8: W^T X[:, i2] against wv,
                                   # matching E8's token-i2 factors
    J += -s * f02 * spec.W.T       # J9: softmax entry i2, as in E9
    J += -f00 * f02 * h00 * ww                              # J10
    J += -f02 * np.outer(m, wv)                             # J11
    J += f02 * h02 * np.outer(t2v, wv)                      # J12
    J += f02 * h02 * spec.W.T                               # J13
    J += f02 * np.outer(t2v, vc)                            # J14
    J += -f00 * f02 * np.outer(vc, wv)                      # J15
    return J


def block_case3(cache: ForwardCache, spec: ProblemSpec,
                i0: int, j0: int, i1: int) -> np.ndarray:
    """Probe-column block: the transpose of the matching case-2 block.

    Symmetry of second derivatives identifies the (i1, i0) block with the
    transposed (i0, i1) block; the FD suite confirms the orientation.
    """
    if i1 == i0:
        raise ValueError("block_case3 requires i1 != i0")
    return block_case2(cache, spec, i0, j0, i1).T


def block_case4(cache: ForwardCache, spec: ProblemSpec,
                i0: int, j0: int, i1: int) -> np.ndarray:
    """Off-probe diagonal block: both derivatives on token i1 != i0."""
    _check_index("i0", i0, spec.n)
    _check_index("i1", i1, spec.n)
    _check_index("j0", j0, spec.d)
    if i1 == i0:
        raise ValueError("block_case4 requires i1 != i0")
    s = cache.S[i0, j0]
    f01 = cache.F[i1, i0]
    h01 = cache.H[i1, j0]
    wv = cache.Wsc[i0, :]
    vc = spec.V[:, j0]
    ww = np.outer(wv, wv)
    wvvc = np.outer(wv, vc)
    K = 2.0 * s * f01 * f01 * ww                            # K1
    K += -2.0 * f01 * f01 * h01 * ww  # K2: coefficient 2, as in F2
    K += -f01 * f01 * (wvvc + wvvc.T)                       # K3
    K += -s * f01 * ww                                      # K4
    K += f01 * h01 * ww                                     # K5
    K += f01 * (wvvc + wvvc.T)                              # K6
    return K


def block_case5(cache: ForwardCache, spec: ProblemSpec,
                i0: int, j0: int, i1: int, i2: int) -> np.ndarray:
    """Fully off-probe block: tokens i0, i1, i2 pairwise distinct."""
    _check_index("i0", i0, spec.n)
    _check_index("i1", i1, spec.n)
    _check_index("i2", i2, spec.n)
    _check_index("j0", j0, spec.d)
    if i1 == i0 or i2 == i0 or i1 == i2:
        raise ValueError("block_case5 requires pairwise distinct tokens")
    s = cache.S[i0, j0]
    f01, f02 = cache.F[i1, i0], cache.F[i2, i0]
    wv = cache.Wsc[i0, :]
    vc = spec.V[:, j0]
    ww = np.outer(wv, wv)
    wvvc = np.outer(wv, vc)
    N = 2.0 * s * f01 * f02 * ww                            # N1
    N += -f01 * f02 * (cache.H[i2, j0] + cache.H[i1, j0]) * ww  # N2
    N += -f01 * f02 * (wvvc + wvvc.T)  # N3: same w vector on both sides,
                                   # matching G3
    return N


@dataclass(frozen=True)
class HessianBlocks:
    """n x n grid of d x d blocks of one residual-entry Hessian."""

    i0: int
    j0: int
    blocks: tuple[tuple[np.ndarray, ...], ...]

    def assembled(self) -> np.ndarray:
        return np.block([[self.blocks[i1][i2] for i2 in range(len(self.blocks))]
                         for i1 in range(len(self.blocks))])


def assemble_hessian_c(cache: ForwardCache, spec: ProblemSpec,
                       i0: int, j0: int) -> HessianBlocks:
    """Tile the five case blocks into the full layout.

    Row i0 of the grid holds case-2 blocks with the case-1 block at
    (i0, i0); column i0 holds case-3 blocks; the remaining diagonal is
    case 4 and everything else case 5.
    """
    _check_index("i0", i0, spec.n)
    _check_index("j0", j0, spec.d)
    n = spec.n
    grid = []
    for i1 in range(n):
        row = []
        for i2 in range(n):
            if i1 == i0 and i2 == i0:
                blk = block_case1(cache, spec, i0, j0)
            elif i1 == i0:
                blk = block_case2(cache, spec, i0, j0, i2)
            elif i2 == i0:
                blk = block_case3(cache, spec, i0, j0, i1)
            elif i1 == i2:
                blk = block_case4(cache, spec, i0, j0, i1)
            else:
                blk = block_case5(cache, spec, i0, j0, i1, i2)
            row.append(blk)
        grid.append(tuple(row))
    return HessianBlocks(i0=i0, j0=j0, blocks=tuple(grid))


def hessian_c(cache: ForwardCache, spec: ProblemSpec, i0: int, j0: int) -> np.ndarray:
    """Assembled nd x nd Hessian of one residual entry."""
    return assemble_hessian_c(cache, spec, i0, j0).assembled()


def hessian_L(cache: ForwardCache, spec: ProblemSpec, X) -> np.ndarray:
    """Loss Hessian 2 * sum (grad_c grad_c^T + c * hess_c) + 2*gamma*I."""
    X = check_input(spec, X)
    nd = spec.n * spec.d
    if nd > dense_cap():
        raise ValueError(
            f"n*d = {nd} exceeds the dense Hessian cap {dense_cap()}; "
            "raise ATTNINV_DENSE_CAP to override"
        )
    rows = np.empty((nd, nd))
    k = 0
    for i0 in range(spec.n):
        for j0 in range(spec.d):
            rows[k] = grad_c(cache, spec, i0, j0)
            k += 1
    acc = rows.T @ rows
    for i0 in range(spec.n):
        for j0 in range(spec.d):
            acc += cache.C[i0, j0] * hessian_c(cache, spec, i0, j0)
    H = 2.0 * acc
    H[np.diag_indices(nd)] += 2.0 * spec.gamma
    return H


__all__ = [
    "HessCase",
    "HessianBlocks",
    "assemble_hessian_c",
    "block_case1",
    "block_case2",
    "block_case3",
    "block_case4",
    "block_case5",
    "classify_case",
    "d2c_entry",
    "hessian_L",
    "hessian_c",
]
