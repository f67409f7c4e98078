"""Resolvent of anisotropic total variation plus a linear forcing term.

Periodic grids only.  The resolvent ``psi_a`` minimizes::

    (1/2a) |zeta - psi|^2 + sum_cells [sigma(D zeta) + f zeta] h^n

and is computed from its dual, a projection problem for a vector field
``z`` constrained cellwise to the Wulff shape::

    min_z  1/2 |div z - f + psi/a|^2 ,   z(x) in W

with ``psi_a = psi + a (div z - f)``.  The difference quotient
``(psi_a - psi)/a = div z - f`` is read off the dual variable directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .anisotropy import Anisotropy, RegularizedAnisotropy, SmoothQuadratic, eval_sigma
from .fields import Forcing, ScalarField, discrete_lipschitz


class ProxConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class FacetSpeedError(RuntimeError):
    pass


# --- discrete calculus --------------------------------------------------------


def grad(u: NDArray[np.float64], h: float) -> NDArray[np.float64]:
    """Forward differences with periodic wrap; output shape ``(n,) + u.shape``."""
    return np.stack([(np.roll(u, -1, axis=d) - u) / h for d in range(u.ndim)])


def div(z: NDArray[np.float64], h: float) -> NDArray[np.float64]:
    """Backward differences, the negative adjoint of :func:`grad`."""
    out = np.zeros(z.shape[1:])
    for d in range(z.shape[0]):
        out += (z[d] - np.roll(z[d], 1, axis=d)) / h
    return out


def _field_values(psi) -> tuple[NDArray[np.float64], float]:
    if isinstance(psi, ScalarField):
        if psi.boundary != "periodic":
            raise ValueError("the prox solver works on periodic grids")
        return psi.values, psi.h
    raise TypeError("expected a ScalarField")


def _forcing_values(f, psi: ScalarField) -> NDArray[np.float64]:
    if isinstance(f, Forcing):
        if not f.is_static:
            raise ValueError("freeze the forcing in time before calling the prox solver")
        return f.on_grid(psi)
    arr = np.broadcast_to(np.asarray(f, dtype=float), psi.shape)
    return np.array(arr)


def energy(psi: ScalarField, A: Anisotropy, f) -> float:
    u, h = _field_values(psi)
    p = np.moveaxis(grad(u, h), 0, -1)
    fv = _forcing_values(f, psi)
    return float(np.sum(eval_sigma(A, p) + fv * u) * h**u.ndim)


# --- projection onto the Wulff shape -----------------------------------------


def project_wulff(A: Anisotropy, v, tol: float = 1e-12, max_iters: int = 100_000) -> NDArray[np.float64]:
    """Euclidean projection of points ``v`` (shape ``(..., n)``) onto ``W``.

    Boxes are clamped; general polygons use Dykstra's alternating scheme
    over the facet half-spaces.
    """
    v = np.asarray(v, dtype=float)
    pts = v[..., None] if A.n == 1 and v.shape[-1:] != (1,) else v
    if A.is_box():
        lo, hi = A.box_bounds()
        out = np.clip(pts, lo, hi)
    else:
        out = _dykstra(A, pts, tol, max_iters)
    return out.reshape(v.shape)


def _dykstra(A: Anisotropy, pts, tol, max_iters):
    normals, offsets = A.facets()
    x = pts.reshape(-1, A.n).copy()
    incr = np.zeros((len(offsets),) + x.shape)
    for _ in range(max_iters):
        prev = x.copy()
        for i, (a, b) in enumerate(zip(normals, offsets)):
            y = x + incr[i]
            excess = np.maximum(y @ a - b, 0.0)
            x = y - excess[:, None] * a
            incr[i] = y - x
        if np.max(np.abs(x - prev), initial=0.0) <= tol:
            break
    return x.reshape(pts.shape)


def _projector(A: Anisotropy):
    """Projection acting on dual fields of shape ``(n,) + grid``."""
    if A.is_box():
        lo, hi = A.box_bounds()
        shape = (A.n,) + (1,) * A.n
        lo_b, hi_b = lo.reshape(shape), hi.reshape(shape)
        return lambda z: np.clip(z, lo_b, hi_b)

    def proj(z):
        return np.moveaxis(project_wulff(A, np.moveaxis(z, 0, -1)), -1, 0)

    return proj


# --- resolvent -------------------------------------------------------------------


@dataclass
class ProxResult:
    psi_a: ScalarField
    a: float
    z: NDArray[np.float64]
    residual: float
    iterations: int
    speed: NDArray[np.float64]  # (psi_a - psi) / a
    history: list[tuple[int, float]] = field(default_factory=list)


def _solve_dual(A: Anisotropy, target, h, z0, tol, max_iters, record_every=10):
    """Accelerated projected gradient for min 1/2 |div z - target|^2 over W^cells."""
    n = target.ndim
    L = 4.0 * n / h**2
    tau = 1.0 / L
    proj = _projector(A)
    z = proj(np.zeros((n,) + target.shape) if z0 is None else z0.copy())
    y = z.copy()
    tk = 1.0
    history = []
    res = np.inf
    for it in range(1, max_iters + 1):
        g = -grad(div(y, h) - target, h)
        z_new = proj(y - tau * g)
        # restart when the momentum direction stops decreasing the objective
        if np.sum((y - z_new) * (z_new - z)) > 0:
            tk = 1.0
            y = z.copy()
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        y = z_new + ((tk - 1.0) / t_next) * (z_new - z)
        z, tk = z_new, t_next
        if it % record_every == 0 or it == max_iters:
            gz = -grad(div(z, h) - target, h)
            res = h * float(np.max(np.abs(z - proj(z - tau * gz)))) / tau
            history.append((it, res))
            if res <= tol:
                return z, res, it, history
    raise ProxConvergenceError("prox dual iteration did not converge", res, max_iters)


def resolvent(psi: ScalarField, f, a: float, A, tol: float = 1e-10, max_iters: int = 200_000,
              z0: NDArray[np.float64] | None = None) -> ProxResult:
    """Resolvent ``psi_a`` of the energy at step ``a``.

    ``A`` is an :class:`Anisotropy` (exact crystalline energy, dual solver)
    or a mode-A :class:`SmoothQuadratic` regularization (primal solver).
    """
    if a <= 0:
        raise ValueError("resolvent step a must be positive")
    u, h = _field_values(psi)
    fv = _forcing_values(f, psi)
    if isinstance(A, RegularizedAnisotropy):
        return _resolvent_smooth(psi, fv, a, A, tol, max_iters)
    target = fv - u / a
    z, res, it, hist = _solve_dual(A, target, h, z0, tol, max_iters)
    speed = div(z, h) - fv
    return ProxResult(psi.with_values(u + a * speed), a, z, res, it, speed, hist)


def _resolvent_smooth(psi, fv, a, reg, tol, max_iters):
    if not isinstance(reg, SmoothQuadratic):
        raise ValueError("the regularized resolvent supports mode A only")
    u, h = psi.values, psi.h
    n = u.ndim
    L = 1.0 / a + reg.hessian_upper * 4.0 * n / h**2
    mu = 1.0 / a
    q = mu / L
    beta = (1.0 - np.sqrt(q)) / (1.0 + np.sqrt(q))

    def gradient(zeta):
        p = np.moveaxis(grad(zeta, h), 0, -1)
        zf = np.moveaxis(reg.gradient(p), -1, 0)
        return (zeta - u) / a - div(zf, h) + fv, zf

    x = u.copy()
    y = x.copy()
    hist = []
    res = np.inf
    for it in range(1, max_iters + 1):
        g, _ = gradient(y)
        x_new = y - g / L
        y = x_new + beta * (x_new - x)
        x = x_new
        if it % 10 == 0:
            gx, _ = gradient(x)
            res = float(np.max(np.abs(gx)))
            hist.append((it, res))
            if res <= tol:
                _, zf = gradient(x)
                speed = (x - u) / a
                return ProxResult(psi.with_values(x), a, zf, res, it, speed, hist)
    raise ProxConvergenceError("regularized prox iteration did not converge", res, max_iters)


def resolvent_lipschitz_margin(psi: ScalarField, result: ProxResult, f: Forcing) -> float:
    """``Lip(psi) + a L_f + 2 h L_f - Lip(psi_a)``; nonnegative when the bound holds."""
    lf = f.lipschitz if isinstance(f, Forcing) else 0.0
    lip0 = discrete_lipschitz(psi.values, psi.h, periodic=True)
    lip1 = discrete_lipschitz(result.psi_a.values, psi.h, periodic=True)
    return lip0 + result.a * lf + 2.0 * psi.h * lf - lip1


# --- minimal divergence ----------------------------------------------------------


@dataclass
class MinimalDivergence:
    cells: NDArray[np.intp]  # flat indices of facet cells
    values: NDArray[np.float64]  # extrapolated speed on facet cells
    bands: dict[int, tuple[NDArray[np.float64], NDArray[np.float64]]]
    estimates: list[NDArray[np.float64]]  # raw (psi_a - psi)/a per schedule entry
    extrapolants: list[NDArray[np.float64]]
    results: list[ProxResult]

    def field(self, shape) -> NDArray[np.float64]:
        out = np.full(int(np.prod(shape)), np.nan)
        out[self.cells] = self.values
        return out.reshape(shape)


DEFAULT_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5)


def facet_mask(psi: ScalarField, threshold: str | float = "exact") -> NDArray[np.bool_]:
    """Cells belonging to the zero set of ``psi``.

    ``"exact"`` keeps cells with ``|psi|`` at rounding level, ``"hlip"``
    uses the looser ``|psi| <= h Lip(psi)``, and a number is used as an
    absolute threshold.
    """
    u = psi.values
    if threshold == "exact":
        thr = 1e-12 * max(1.0, float(np.max(np.abs(u))))
    elif threshold == "hlip":
        thr = psi.h * discrete_lipschitz(u, psi.h, periodic=True)
    else:
        thr = float(threshold)
    return np.abs(u) <= thr


def _neighbourhood_band(field_vals, mask, radius_cells):
    """min / max of ``field_vals`` over masked cells within a Chebyshev radius."""
    lo = np.where(mask, field_vals, np.inf)
    hi = np.where(mask, field_vals, -np.inf)
    out_lo, out_hi = lo.copy(), hi.copy()
    for d in range(field_vals.ndim):
        acc_lo, acc_hi = out_lo.copy(), out_hi.copy()
        for s in range(1, radius_cells + 1):
            for sgn in (1, -1):
                acc_lo = np.minimum(acc_lo, np.roll(out_lo, sgn * s, axis=d))
                acc_hi = np.maximum(acc_hi, np.roll(out_hi, sgn * s, axis=d))
        out_lo, out_hi = acc_lo, acc_hi
    return out_lo[mask], out_hi[mask]


def minimal_divergence(psi: ScalarField, f, A: Anisotropy, a_schedule=DEFAULT_SCHEDULE, tol: float = 1e-10,
                       max_iters: int = 200_000, threshold: str | float = "exact") -> MinimalDivergence:
    """Speed ``div z_min - f`` on the zero set of ``psi`` via resolvents with shrinking step.

    Successive first-order Richardson extrapolants of ``(psi_a - psi)/a``
    must agree to ``10 tol``.
    """
    sched = [float(a) for a in a_schedule]
    if len(sched) < 2 or any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValueError("a_schedule must contain at least two strictly decreasing steps")
    mask = facet_mask(psi, threshold)
    if not mask.any():
        raise ValueError("psi has no zero set on this grid")
    results, estimates = [], []
    z0 = None
    for a in sched:
        r = resolvent(psi, f, a, A, tol=tol, max_iters=max_iters, z0=z0)
        z0 = r.z
        results.append(r)
        estimates.append(r.speed[mask])
    extrap = [
        (a0 * e1 - a1 * e0) / (a0 - a1)
        for (a0, e0), (a1, e1) in zip(zip(sched, estimates), zip(sched[1:], estimates[1:]))
    ]
    last = extrap[-1]
    prev = extrap[-2] if len(extrap) > 1 else estimates[-1]
    gap = float(np.max(np.abs(last - prev)))
    if gap > 10.0 * tol:
        raise FacetSpeedError(f"facet speed not resolved: successive estimates differ by {gap:.3e}")
    speed_field = np.zeros(psi.shape)
    speed_field[mask] = last
    bands = {r: _neighbourhood_band(speed_field, mask, r) for r in (3, 2, 1)}
    return MinimalDivergence(np.flatnonzero(mask.ravel()), last, bands, estimates, extrap, results)
