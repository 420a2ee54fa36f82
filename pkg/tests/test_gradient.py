import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attninv.analysis import effective_bound_constant
from attninv.gradient import dc_entry, grad_L, grad_c, grad_f_direction
from attninv.model import ProblemSpec, forward_cache, loss, synthesize_target
from attninv.oracle import FdConfig, fd_grad, fd_jacobian
from conftest import bounded_instance

CFG = FdConfig()


def residual_fn(spec, i0, j0):
    return lambda Y: forward_cache(spec, Y).C[i0, j0]


def test_dc_entry_zero_input_only_value_term():
    spec, _ = bounded_instance(1, 3, 2)
    X0 = np.zeros((2, 3))
    cache = forward_cache(spec, X0)
    for i0 in range(3):
        for j0 in range(2):
            for i1 in range(3):
                for j1 in range(2):
                    res = dc_entry(cache, spec, i0, j0, i1, j1)
                    assert res.total == pytest.approx(spec.V[j1, j0] / 3, abs=1e-15)
                    live = res.terms[-1]
                    assert live[0] in ("C5", "C8")
                    for name, value in res.terms[:-1]:
                        assert value == 0.0


def test_dc_entry_single_token_collapses_to_value():
    # with one token the softmax weight is constant, so only C5 survives
    spec = ProblemSpec(1, 1, [[0.8]], [[1.7]], [[0.3]])
    cache = forward_cache(spec, [[0.6]])
    res = dc_entry(cache, spec, 0, 0, 0, 0)
    assert res.total == pytest.approx(1.7, abs=1e-12)


def test_dc_entry_matches_fd_probe():
    spec, X = bounded_instance(0, 3, 2)
    cache = forward_cache(spec, X)
    got = dc_entry(cache, spec, 0, 0, 1, 1).total
    fd = fd_grad(residual_fn(spec, 0, 0), X, CFG)[1 * 2 + 1]
    assert got == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_dc_entry_index_errors():
    spec, X = bounded_instance(0, 2, 2)
    cache = forward_cache(spec, X)
    with pytest.raises(IndexError):
        dc_entry(cache, spec, 2, 0, 0, 0)
    with pytest.raises(IndexError):
        dc_entry(cache, spec, 0, 0, 0, 5)


def test_dc_terms_sum_in_listed_order():
    spec, X = bounded_instance(4, 4, 2)
    cache = forward_cache(spec, X)
    res = dc_entry(cache, spec, 1, 1, 1, 0)
    acc = 0.0
    for _, v in res.terms:
        acc += v
    assert res.total == acc


def test_grad_c_zero_input_constant():
    spec = ProblemSpec(2, 1, [[0.4]], [[1.0]], np.zeros((2, 1)))
    cache = forward_cache(spec, np.zeros((1, 2)))
    for i0 in range(2):
        g = grad_c(cache, spec, i0, 0)
        assert np.allclose(g, 0.5, atol=1e-15)


@given(st.integers(0, 2**31 - 1), st.integers(2, 5), st.integers(1, 3))
@settings(max_examples=20, deadline=None)
def test_grad_c_entries_match_dc_entry(seed, n, d):
    spec, X = bounded_instance(seed, n, d)
    cache = forward_cache(spec, X)
    for i0 in range(n):
        for j0 in range(d):
            g = grad_c(cache, spec, i0, j0)
            for i1 in range(n):
                for j1 in range(d):
                    assert g[i1 * d + j1] == pytest.approx(
                        dc_entry(cache, spec, i0, j0, i1, j1).total,
                        rel=1e-12, abs=1e-15)


def test_grad_c_norm_bound_and_fd_row():
    spec, X = bounded_instance(0, 3, 2)
    cache = forward_cache(spec, X)
    R = effective_bound_constant(spec, X)
    nd = spec.n * spec.d
    for i0 in range(spec.n):
        for j0 in range(spec.d):
            g = grad_c(cache, spec, i0, j0)
            assert np.linalg.norm(g) <= 5 * np.sqrt(nd) * R**4
            fd = fd_grad(residual_fn(spec, i0, j0), X, CFG)
            assert np.abs(g - fd).max() <= 1e-6 * (1 + np.abs(fd).max())


@given(st.integers(0, 2**31 - 1), st.integers(1, 5), st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_dc_entry_bound(seed, n, d):
    spec, X = bounded_instance(seed, n, d)
    cache = forward_cache(spec, X)
    R = effective_bound_constant(spec, X)
    for i0 in range(n):
        for j0 in range(d):
            for i1 in range(n):
                for j1 in range(d):
                    assert abs(dc_entry(cache, spec, i0, j0, i1, j1).total) <= 5 * R**4


def test_grad_f_single_token_is_zero():
    spec = ProblemSpec(1, 1, [[0.9]], [[1.0]], [[0.0]])
    cache = forward_cache(spec, [[0.4]])
    assert np.array_equal(grad_f_direction(cache, spec, 0, 0, 0), [0.0])


@given(st.integers(0, 2**31 - 1), st.integers(1, 5), st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_grad_f_entries_sum_to_zero(seed, n, d):
    spec, X = bounded_instance(seed, n, d)
    cache = forward_cache(spec, X)
    for i0 in range(n):
        for i1 in range(n):
            for j1 in range(d):
                g = grad_f_direction(cache, spec, i0, i1, j1)
                assert abs(g.sum()) < 1e-12


def test_grad_f_matches_fd_of_softmax_column():
    spec, X = bounded_instance(0, 4, 2)
    cache = forward_cache(spec, X)
    for i0 in range(4):
        J = fd_jacobian(lambda Y: forward_cache(spec, Y).F[:, i0].copy(), X, CFG)
        for i1 in range(4):
            for j1 in range(2):
                g = grad_f_direction(cache, spec, i0, i1, j1)
                assert np.abs(g - J[:, i1 * 2 + j1]).max() < 1e-6


def test_grad_L_closed_form_at_zero():
    spec = ProblemSpec(2, 1, [[0.4]], [[1.0]], [[1.0], [1.0]])
    X0 = np.zeros((1, 2))
    cache = forward_cache(spec, X0)
    assert np.allclose(grad_L(cache, spec, X0), -2.0, atol=1e-14)


def test_grad_L_vanishes_at_synthesized_truth():
    spec, X = bounded_instance(7, 3, 2)
    made = synthesize_target(spec.W, spec.V, X)
    cache = forward_cache(made, X)
    assert np.abs(grad_L(cache, made, X)).max() < 1e-10


def test_grad_L_matches_fd():
    spec, X = bounded_instance(0, 3, 2)
    spec = spec.with_gamma(0.37)
    cache = forward_cache(spec, X)
    g = grad_L(cache, spec, X)
    fd = fd_grad(lambda Y: loss(spec, Y), X, CFG)
    assert np.abs(g - fd).max() <= 1e-6 * (1 + np.abs(fd).max())
