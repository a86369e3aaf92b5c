import numpy as np
import pytest

from coherentfb.analysis import hinf_norm
from coherentfb.io import load_scenario
from coherentfb.optimize import UNSTABLE_PENALTY, grid_axes, grid_search, nelder_mead, penalized
import oracles


def test_nelder_mead_quadratic():
    res = nelder_mead(lambda x: (x[0] - 3.0) ** 2, [0.0])
    assert res.x[0] == pytest.approx(3.0, abs=1e-6)
    assert res.converged and res.nfev > 1


def test_nelder_mead_never_worse_than_start():
    f = lambda x: float(np.sum(x ** 2)) + (0 if np.all(np.abs(x) < 1e-3) else 1.0)
    res = nelder_mead(f, [0.0, 0.0], maxfev=20)
    assert res.fun <= f(np.zeros(2))


def test_nelder_mead_rejects_non_finite_start():
    with pytest.raises(ValueError, match="not finite"):
        nelder_mead(lambda x: np.inf, [1.0])


def test_penalized_unstable():
    f = penalized(lambda x: 7.0, lambda x: np.array([[x[0]]]))
    assert f(np.array([-1.0])) == 7.0
    assert f(np.array([0.5])) == pytest.approx(UNSTABLE_PENALTY + 0.5)


def test_grid_axes_reproducible():
    axes = grid_axes([(-1.0, 1.0), (2.0, 2.0)], 0.5)
    assert np.allclose(axes[0], [-1, -0.5, 0, 0.5, 1]) and np.allclose(axes[1], [2.0])
    assert len(grid_axes([(0.0, 1.0)], 0.3)[0]) == 4
    with pytest.raises(ValueError, match="empty"):
        grid_axes([(1.0, 0.0)], 0.1)
    with pytest.raises(ValueError, match="positive"):
        grid_axes([(0.0, 1.0)], 0.0)


def test_grid_search_tie_break_and_vectorized():
    f = lambda x: abs(x[0] ** 2 - 1.0)
    res = grid_search(f, [(-2.0, 2.0)], 0.5)
    assert res.x[0] == -1.0 and res.fun == 0.0 and res.nfev == 9
    resv = grid_search(lambda X: np.abs(X[:, 0] ** 2 - 1.0), [(-2.0, 2.0)], 0.5, vectorized=True)
    assert resv.x[0] == res.x[0]
    # NaN counts as +inf
    resn = grid_search(lambda x: np.nan if x[0] < 0 else x[0], [(-1.0, 1.0)], 1.0)
    assert resn.x[0] == 0.0


def test_simple_hinf_loop_search():
    sc = load_scenario("builtin:cavity_loop_hinf")

    def cost(x):
        cl = sc.build(omega=x[0], K=x[1])
        return hinf_norm(cl.A, cl.B, cl.C, cl.D)

    x0 = np.array([0.0, 0.0])
    cl0 = sc.build(omega=0.0, K=0.0)
    assert cost(x0) == pytest.approx(oracles.hinf_grid(cl0.A, cl0.B, cl0.C, cl0.D), rel=1e-6)
    res = nelder_mead(cost, [0.5, 1.0], xatol=1e-6)
    assert res.fun <= cost(np.array([0.5, 1.0]))
    # the infimum over the loop parameters is 2 / sqrt(10), approached only as K grows
    assert res.fun >= 2 / np.sqrt(10) - 1e-6
    cl1 = sc.build(omega=0.5, K=1.0)
    assert cost([0.5, 1.0]) == pytest.approx(oracles.hinf_grid(cl1.A, cl1.B, cl1.C, cl1.D), rel=1e-6)
