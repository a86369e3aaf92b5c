import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from coherentfb.algebra import flat, from_quadrature, symplectic, to_quadrature
from coherentfb.analysis import lyapunov_solve
from coherentfb.model import GeneralModel, build
from coherentfb.optimize import grid_axes
from coherentfb.realizability import check_annihilation, skew_factor
import oracles

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def cmat(r, c):
    return st.tuples(arrays(float, (r, c), elements=finite),
                     arrays(float, (r, c), elements=finite)).map(lambda p: p[0] + 1j * p[1])


dims = st.integers(1, 3)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_flat_involution_and_anti_homomorphism(data):
    r, k, c = data.draw(dims), data.draw(dims), data.draw(dims)
    U1, V1 = data.draw(cmat(r, k)), data.draw(cmat(r, k))
    U2, V2 = data.draw(cmat(k, c)), data.draw(cmat(k, c))
    X, Y = oracles.doubled(U1, V1), oracles.doubled(U2, V2)
    assert np.allclose(flat(flat(X)), X)
    assert np.allclose(flat(X @ Y), flat(Y) @ flat(X), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_quadrature_round_trip(data):
    r, c = data.draw(dims), data.draw(dims)
    X = oracles.doubled(data.draw(cmat(r, c)), data.draw(cmat(r, c)))
    Xq = to_quadrature(X)
    assert np.isrealobj(Xq)
    assert np.allclose(from_quadrature(Xq), X, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_build_is_realizable(data):
    n, m = data.draw(dims), data.draw(dims)
    H, S = data.draw(cmat(n, n)), data.draw(cmat(n, n))
    G = GeneralModel(H + H.conj().T, S + S.T, data.draw(cmat(m, n)), data.draw(cmat(m, n)),
                     data.draw(cmat(1, n)), data.draw(cmat(1, n)))
    Sm = build(G)
    assert check_annihilation(Sm.A, Sm.B_f, Sm.C_f, Sm.B_d, G.k_minus, G.k_plus, tol=1e-10).verdict


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1), st.booleans())
def test_lyapunov_residual(n, seed, cplx):
    rng = np.random.default_rng(seed)
    A = oracles.random_stable(rng, n, cplx)
    W = np.eye(n)
    P = lyapunov_solve(A, W)
    assert np.abs(A @ P + P @ A.conj().T + W).max() <= 1e-8 * max(1.0, np.abs(P).max())


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(0, 8), st.integers(0, 2 ** 32 - 1))
def test_skew_factor_reconstructs(k, r, seed):
    rng = np.random.default_rng(seed)
    d = 2 * k
    L = rng.normal(size=(d, r))
    S = rng.normal(size=(r, r))
    Z = L @ (S - S.T) @ L.T
    B = skew_factor(Z)
    assert np.abs(B @ symplectic(k) @ B.T - Z).max() <= 1e-8 * max(1.0, np.abs(Z).max())


@given(st.floats(-10, 10), st.floats(0, 10), st.floats(0.01, 3))
def test_grid_axes_stay_in_box(lo, width, h):
    (ax,) = grid_axes([(lo, lo + width)], h)
    assert ax[0] == lo and ax[-1] <= lo + width + 1e-9
    assert np.allclose(np.diff(ax), h) if len(ax) > 1 else True
