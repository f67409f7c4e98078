import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from facetflow.anisotropy import Anisotropy, SmoothQuadratic, eval_polar
from facetflow.facet1d import periodic_zero_set_speeds
from facetflow.fields import Forcing, centered_grid
from facetflow.tvprox import (FacetSpeedError, ProxConvergenceError, div, energy, facet_mask, grad,
                              minimal_divergence, project_wulff, resolvent, resolvent_lipschitz_margin)

SQ = Anisotropy.preset("square")
IV = Anisotropy.preset("interval")
HEX = Anisotropy(np.array([[np.cos(a), np.sin(a)] for a in np.arange(6) * np.pi / 3]))


@given(st.integers(0, 2**31 - 1))
def test_div_is_negative_adjoint_of_grad(seed):
    r = np.random.default_rng(seed)
    u = r.normal(size=(7, 5))
    z = r.normal(size=(2, 7, 5))
    h = 0.3
    assert np.sum(grad(u, h) * z) == pytest.approx(-np.sum(u * div(z, h)), abs=1e-9)


def test_divergence_has_zero_mean():
    z = np.random.default_rng(0).normal(size=(2, 9, 9))
    assert abs(div(z, 0.1).sum()) < 1e-10


@pytest.mark.parametrize("A", [SQ, HEX])
@given(st.integers(0, 2**31 - 1))
def test_projection_lands_in_wulff_shape_and_is_idempotent(A, seed):
    v = np.random.default_rng(seed).normal(scale=2.0, size=(30, 2))
    p = project_wulff(A, v)
    assert np.all(eval_polar(A, p) <= 1 + 1e-9)
    assert np.allclose(project_wulff(A, p), p, atol=1e-9)
    inside = eval_polar(A, v) <= 1
    assert np.allclose(p[inside], v[inside])


def test_hexagon_projection_against_qp():
    A = HEX
    v = np.array([1.5, 0.7])
    normals, offsets = A.facets()
    x = cp.Variable(2)
    cp.Problem(cp.Minimize(cp.sum_squares(x - v)), [normals @ x <= offsets]).solve()
    assert np.allclose(project_wulff(A, v), x.value, atol=1e-6)


def _cvx_resolvent(psi, fv, a, h, A):
    """Primal resolvent as a convex program (oracle)."""
    u = psi.values
    z = cp.Variable(u.shape)
    if u.ndim == 1:
        d = cp.hstack([z[1:] - z[:-1], z[:1] - z[-1:]]) / h
        tv = cp.sum(cp.abs(d))
    else:
        dx = cp.vstack([z[1:, :] - z[:-1, :], z[:1, :] - z[-1:, :]]) / h
        dy = cp.hstack([z[:, 1:] - z[:, :-1], z[:, :1] - z[:, -1:]]) / h
        tv = cp.sum(cp.abs(dx)) + cp.sum(cp.abs(dy))  # square Wulff: sigma = l1
    obj = cp.sum_squares(z - u) / (2 * a) + tv + cp.sum(cp.multiply(fv, z))
    cp.Problem(cp.Minimize(obj * h**u.ndim)).solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10,
                                                   tol_feas=1e-10)
    return z.value


def test_resolvent_matches_convex_program_1d():
    r = np.random.default_rng(5)
    N, h, a = 40, 0.1, 0.05
    psi = centered_grid(1, N, h, boundary="periodic", values=np.cumsum(r.normal(size=N)) * 0.05)
    psi = psi.with_values(psi.values - np.linspace(0, psi.values[-1], N))
    fv = r.normal(size=N)
    res = resolvent(psi, fv, a, IV, tol=1e-12)
    ref = _cvx_resolvent(psi, fv, a, h, IV)
    assert np.max(np.abs(res.psi_a.values - ref)) < 1e-6


def test_resolvent_matches_convex_program_2d():
    r = np.random.default_rng(6)
    N, h, a = 10, 0.2, 0.1
    psi = centered_grid(2, N, h, boundary="periodic", values=r.normal(size=(N, N)) * 0.1)
    fv = r.normal(size=(N, N))
    res = resolvent(psi, fv, a, SQ, tol=1e-12)
    ref = _cvx_resolvent(psi, fv, a, h, SQ)
    assert np.max(np.abs(res.psi_a.values - ref)) < 1e-6


def test_resolvent_decreases_energy():
    r = np.random.default_rng(7)
    psi = centered_grid(2, 16, 0.125, boundary="periodic", values=r.normal(size=(16, 16)) * 0.2)
    f = Forcing.tent(1.0, 0.5, (0.0, 0.0))
    res = resolvent(psi, f, 0.01, SQ)
    assert energy(res.psi_a, SQ, f) <= energy(psi, SQ, f)


def test_resolvent_rejects_bad_step():
    psi = centered_grid(1, 8, 0.1, boundary="periodic")
    with pytest.raises(ValueError):
        resolvent(psi, 0.0, -1.0, IV)


def test_resolvent_reports_nonconvergence():
    psi = centered_grid(1, 64, 0.05, boundary="periodic", values=np.sin(np.arange(64)))
    with pytest.raises(ProxConvergenceError) as exc:
        resolvent(psi, 0.0, 1.0, IV, tol=1e-14, max_iters=20)
    assert exc.value.iterations == 20


def test_smooth_resolvent_solves_its_optimality_condition():
    r = np.random.default_rng(8)
    reg = SmoothQuadratic(SQ, 4)
    psi = centered_grid(2, 12, 0.2, boundary="periodic", values=r.normal(size=(12, 12)) * 0.1)
    res = resolvent(psi, 0.0, 0.05, reg, tol=1e-10)
    assert res.residual <= 1e-10
    assert np.allclose(res.speed, (res.psi_a.values - psi.values) / 0.05)


def test_facet_mask_modes():
    psi = centered_grid(1, 6, 0.5, boundary="periodic", values=np.array([0.0, 1e-14, 0.2, 0.6, 0.2, -0.3]))
    assert facet_mask(psi).tolist() == [True, True, False, False, False, False]
    assert facet_mask(psi, 0.25).sum() == 4
    assert facet_mask(psi, "hlip").sum() >= 2


def test_valley_facet_speed():
    # interval facet of length 1 pinned by dual values -1 and +1: speed (1 - (-1)) / 1
    N = 64
    h = 4.0 / N
    x = centered_grid(1, N, h, boundary="periodic").coords()[:, 0]
    psi = centered_grid(1, N, h, boundary="periodic", values=np.maximum(np.abs(x) - 0.5, 0.0))
    md = minimal_divergence(psi, 0.0, IV)
    assert np.allclose(md.values, 2.0, atol=1e-8)


def test_tent_facet_speed_matches_taut_string():
    N = 256
    h = 4.0 / N
    f = Forcing.tent(3.0, 1.0)
    grid = centered_grid(1, N, h, boundary="periodic")
    x = grid.coords()[:, 0]
    ell = np.sqrt(2 / 3)
    psi = grid.with_values(np.maximum(np.abs(x) - ell, 0.0) * 0.5)
    md = minimal_divergence(psi, f, IV)
    exact = periodic_zero_set_speeds(psi.values, f.on_grid(psi), h)
    assert np.max(np.abs(md.values - exact[md.cells])) < 1e-8
    # frozen value for this grid; the continuum value is -0.550510
    assert md.values.mean() == pytest.approx(-0.550481, abs=2e-6)


def test_square_wulff_facet_speed_is_flux_over_area():
    # flat square of half-side R: unit outward flux through perimeter 8R over area 4R^2
    N, L = 64, 2.0
    grid = centered_grid(2, N, L / N, boundary="periodic")
    R = 0.5
    psi = grid.with_values(np.clip(eval_polar(SQ, grid.coords()) - R, 0.0, 0.3))
    md = minimal_divergence(psi, 0.0, SQ)
    # facet spans whole cells: its discrete gauge radius is R rounded to the grid
    Rd = (md.cells.size ** 0.5) * grid.h / 2
    assert np.allclose(md.values, 2.0 / Rd, rtol=1e-6)


def test_minimal_divergence_needs_a_zero_set():
    psi = centered_grid(1, 16, 0.1, boundary="periodic", values=np.ones(16))
    with pytest.raises(ValueError, match="no zero set"):
        minimal_divergence(psi, 0.0, IV)


def test_minimal_divergence_schedule_validation():
    psi = centered_grid(1, 16, 0.1, boundary="periodic")
    with pytest.raises(ValueError, match="strictly decreasing"):
        minimal_divergence(psi, 0.0, IV, a_schedule=(1e-3, 1e-2))


def test_unresolved_facet_speed_is_reported():
    # a near-zero cell beside the facet is only separated at very small steps
    N = 64
    h = 4.0 / N
    vals = np.zeros(N)
    vals[N // 2:] = 0.3
    vals[N // 2] = 1e-7
    psi = centered_grid(1, N, h, boundary="periodic", values=vals)
    with pytest.raises(FacetSpeedError):
        minimal_divergence(psi, 0.0, IV, a_schedule=(1e-2, 1e-3), tol=1e-12)


def test_lipschitz_margin_nonnegative_on_example():
    N = 128
    h = 4.0 / N
    grid = centered_grid(1, N, h, boundary="periodic")
    x = grid.coords()[:, 0]
    psi = grid.with_values(np.clip(np.abs(x) - 0.6, 0.0, 0.5))
    f = Forcing.tent(2.0, 0.8)
    for a in (1e-1, 1e-2, 1e-3):
        assert resolvent_lipschitz_margin(psi, resolvent(psi, f, a, IV), f) >= 0
