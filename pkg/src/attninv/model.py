"""Problem data and forward evaluation for single-layer attention inversion.

The unknown is a matrix X of shape (d, n): one column per token, one row per
feature.  The model output is built from column-wise softmax scores of
X^T W X applied to the value projection X^T V; the loss is the squared
Frobenius residual against a target B plus an optional quadratic penalty.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

DEFAULT_DENSE_CAP = 512


def dense_cap() -> int:
    """Largest n*d for which dense nd x nd Hessians may be materialized."""
    raw = os.environ.get("ATTNINV_DENSE_CAP")
    if raw is None:
        return DEFAULT_DENSE_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError("ATTNINV_DENSE_CAP must be a positive integer")
    return cap


class NumericalRangeError(ValueError):
    """exp() overflowed: the input is outside the bounded-parameter regime."""


def _as_float_matrix(M, name: str, shape: tuple[int, int]) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass(frozen=True)
class ProblemSpec:
    """Fixed data of one inversion instance.

    Attributes
    ----------
    n : token count
    d : feature dimension
    W : (d, d) combined attention weight (key times query transpose)
    V : (d, d) value weight
    B : (n, d) target output
    gamma : nonnegative quadratic regularization weight
    """

    n: int
    d: int
    W: np.ndarray
    V: np.ndarray
    B: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        object.__setattr__(self, "W", _as_float_matrix(self.W, "W", (self.d, self.d)))
        object.__setattr__(self, "V", _as_float_matrix(self.V, "V", (self.d, self.d)))
        object.__setattr__(self, "B", _as_float_matrix(self.B, "B", (self.n, self.d)))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError("gamma must be finite and nonnegative")

    def with_gamma(self, gamma: float) -> "ProblemSpec":
        return ProblemSpec(self.n, self.d, self.W, self.V, self.B, gamma)


def check_input(spec: ProblemSpec, X) -> np.ndarray:
    """Validate a candidate input matrix against the instance dimensions."""
    return _as_float_matrix(X, "X", (spec.d, spec.n))


def flatten_input(X: np.ndarray) -> np.ndarray:
    """Canonical vec: index k = i*d + j holds X[j, i] (token-major order).

    This ordering keeps the d x d Hessian blocks for a token pair (i1, i2)
    contiguous in the flattened coordinates.
    """
    return np.ascontiguousarray(X.T).reshape(-1)


def unflatten_input(v: np.ndarray, n: int, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (n * d,):
        raise ValueError(f"expected a length-{n * d} vector, got shape {v.shape}")
    return v.reshape(n, d).T.copy()


@dataclass(frozen=True)
class ForwardCache:
    """All intermediate quantities of one forward pass, shared by the
    gradient and Hessian code.

    U    : (n, n) raw exponential scores, column i0 = exp(X^T W X[:, i0])
    alpha: (n,) column sums of U
    F    : (n, n) column-stochastic softmax probabilities, F = U / alpha
    H    : (n, d) value projection, column j0 = X^T V[:, j0]
    S    : (n, d) model output, S[i0, j0] = <F[:, i0], H[:, j0]>
    C    : (n, d) residuals, C = S - B
    Wsc  : (n, d) score coefficients, Wsc[i0, j] = <W[j, :], X[:, i0]>
    Zsc  : (n, d) softmax-averaged scores, Zsc[i0, j] = <F[:, i0], XW[:, j]>
    XW   : (n, d) X^T W; column j is the vector paired with F in Zsc, and
           row i0 is W^T X[:, i0]
    """

    U: np.ndarray
    alpha: np.ndarray
    F: np.ndarray
    H: np.ndarray
    S: np.ndarray
    C: np.ndarray
    Wsc: np.ndarray
    Zsc: np.ndarray
    XW: np.ndarray


def forward_cache(spec: ProblemSpec, X) -> ForwardCache:
    """Evaluate all forward quantities at X.

    Raises NumericalRangeError when a raw exponential overflows, naming the
    offending score column.  The softmax F itself is computed max-shifted,
    so it stays finite whenever the scores are finite.
    """
    X = check_input(spec, X)
    scores = X.T @ spec.W @ X
    with np.errstate(over="ignore"):
        U = np.exp(scores)
    if not np.all(np.isfinite(U)):
        bad = int(np.flatnonzero(~np.isfinite(U).all(axis=0))[0])
        raise NumericalRangeError(
            f"exp overflow in score column {bad}; inputs exceed the bounded regime"
        )
    alpha = U.sum(axis=0)
    shifted = np.exp(scores - scores.max(axis=0, keepdims=True))
    F = shifted / shifted.sum(axis=0, keepdims=True)
    H = X.T @ spec.V
    S = F.T @ H
    C = S - spec.B
    Wsc = (spec.W @ X).T
    XW = X.T @ spec.W
    Zsc = F.T @ XW
    return ForwardCache(U=U, alpha=alpha, F=F, H=H, S=S, C=C, Wsc=Wsc, Zsc=Zsc, XW=XW)


def loss(spec: ProblemSpec, X, cache: ForwardCache | None = None) -> float:
    """Sum of squared residuals plus gamma * ||vec(X)||^2."""
    X = check_input(spec, X)
    if cache is None:
        cache = forward_cache(spec, X)
    return float(np.sum(cache.C * cache.C) + spec.gamma * np.sum(X * X))


def loss_frobenius(spec: ProblemSpec, X) -> float:
    """Independent evaluation of the loss as an explicit normalized matrix
    product, without the cache: column-normalize exp(X^T W X), transpose,
    multiply by X^T V.  Used by tests to pin the two-form agreement."""
    X = check_input(spec, X)
    with np.errstate(over="ignore"):
        A = np.exp(X.T @ spec.W @ X)
    if not np.all(np.isfinite(A)):
        raise NumericalRangeError("exp overflow in score matrix")
    P = A / A.sum(axis=0, keepdims=True)
    out = P.T @ (X.T @ spec.V)
    R = out - spec.B
    return float(np.sum(R * R) + spec.gamma * np.sum(X * X))


def attention_forward(Q, K, V) -> np.ndarray:
    """Single attention layer: row-softmax of exp(Q K^T) applied to V."""
    Q = np.asarray(Q, dtype=float)
    K = np.asarray(K, dtype=float)
    V = np.asarray(V, dtype=float)
    if Q.ndim != 2 or Q.shape != K.shape or V.shape[0] != Q.shape[0] or V.ndim != 2:
        raise ValueError("Q, K must share shape (n, d) and V must have n rows")
    scores = Q @ K.T
    with np.errstate(over="ignore"):
        A = np.exp(scores)
    if not np.all(np.isfinite(A)):
        bad = int(np.flatnonzero(~np.isfinite(A).all(axis=1))[0])
        raise NumericalRangeError(f"exp overflow in attention row {bad}")
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    P = shifted / shifted.sum(axis=1, keepdims=True)
    return P @ V


def synthesize_target(W, V, X_true, gamma: float = 0.0) -> ProblemSpec:
    """Build a realizable instance: set B to the model output at X_true.

    With gamma = 0 the returned spec has loss(spec, X_true) = 0, making
    X_true a global minimizer.
    """
    X_true = np.asarray(X_true, dtype=float)
    if X_true.ndim != 2:
        raise ValueError("X_true must be a (d, n) matrix")
    d, n = X_true.shape
    zero_target = ProblemSpec(n, d, W, V, np.zeros((n, d)), 0.0)
    cache = forward_cache(zero_target, X_true)
    return ProblemSpec(n, d, W, V, cache.S.copy(), gamma)
