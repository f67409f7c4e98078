"""Explicit level-set evolution for the regularized anisotropic flow.

The update at each cell is::

    u_new = u - dt * N(u) * g(nu, -div z + f),     z = grad sigma_m(D u)

with ``z`` evaluated on cell faces from one-sided differences, so that
``div z`` is a conservative second-order stencil, and ``N`` the upwind
gradient magnitude chosen by the sign of the velocity.  For box Wulff
shapes the face flux depends only on the normal difference and the
scheme is monotone under :func:`cfl_dt`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from numpy.typing import NDArray

from .anisotropy import Anisotropy, RegularizedAnisotropy, SmoothQuadratic, eval_polar
from .fields import Forcing, ScalarField, discrete_lipschitz


class DomainTooSmallError(RuntimeError):
    pass


class SchemeError(FloatingPointError):
    pass


# --- mobility -----------------------------------------------------------------


@dataclass(frozen=True)
class Mobility:
    """``g(nu, xi) = beta(nu) * xi`` or ``beta(nu) * clip(xi, -cap, cap)``.

    ``beta`` is a positive constant or a table of values at equally spaced
    normal angles on ``[0, 2 pi)``, interpolated periodically.
    """

    form: str = "linear"
    beta: float | tuple[float, ...] = 1.0
    cap: float = np.inf

    def __post_init__(self):
        if self.form not in ("linear", "clamped"):
            raise ValueError(f"unknown mobility form {self.form!r}")
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ValueError("mobility beta must be finite and nonnegative")
        if self.form == "clamped" and not self.cap >= 0:
            raise ValueError("clamped mobility needs cap >= 0")

    @property
    def constant(self) -> bool:
        return np.ndim(self.beta) == 0 or len(self.beta) == 1

    @property
    def lipschitz(self) -> float:
        return float(np.max(self.beta))

    @property
    def effective_cap(self) -> float:
        return self.cap if self.form == "clamped" else np.inf

    def beta_of(self, nu: NDArray[np.float64]) -> NDArray[np.float64] | float:
        if self.constant:
            return float(np.ravel(self.beta)[0])
        table = np.asarray(self.beta, dtype=float)
        ang = np.mod(np.arctan2(nu[..., 1], nu[..., 0]) if nu.shape[-1] > 1 else np.where(nu[..., 0] >= 0, 0.0, np.pi), 2 * np.pi)
        grid = np.arange(len(table) + 1) * (2 * np.pi / len(table))
        return np.interp(ang, grid, np.append(table, table[0]))

    def __call__(self, nu, xi):
        xi = np.asarray(xi, dtype=float)
        b = self.beta_of(np.asarray(nu, dtype=float))
        if self.form == "clamped":
            xi = np.clip(xi, -self.cap, self.cap)
        return b * xi

    def G(self, n: int, f_sup: float, r_max: float, samples: int = 4001) -> float:
        """``sup_{0 < r <= r_max} sup_nu r |g(nu, +-(n-1)/r + f_sup)|``.

        Unbounded in ``r`` once ``f_sup > 0``, hence the cap ``r_max``.
        """
        r = np.concatenate([np.geomspace(1e-9 * r_max, r_max, samples), [r_max]])
        b = self.lipschitz
        vals = []
        for sgn in (1.0, -1.0):
            xi = sgn * (n - 1) / r + f_sup
            if self.form == "clamped":
                xi = np.clip(xi, -self.cap, self.cap)
            vals.append(r * b * np.abs(xi))
        return float(np.max(vals))


# --- stability -------------------------------------------------------------------


def cfl_dt(reg: RegularizedAnisotropy, M: Mobility, h: float, grad_bound: float, n: int | None = None,
           safety: float = 4.0) -> float:
    """``h^2 / (2 n a_m L_g grad_bound safety)``."""
    if not isinstance(reg, SmoothQuadratic):
        raise ValueError("the explicit evolver needs a mode A regularization")
    n = reg.base.n if n is None else n
    denom = 2.0 * n * reg.a_m * max(M.lipschitz, 1e-300) * max(grad_bound, 1e-300) * safety
    return h * h / denom


# --- one step ----------------------------------------------------------------------


@numba.njit(cache=True)
def _tanh(x):
    # exact saturation and zero keep plateaus and far field bitwise unchanged
    if x > 20.0:
        return 1.0
    if x < -20.0:
        return -1.0
    if -0.05 < x < 0.05:
        # Taylor polynomial, within one ulp of tanh on this range
        x2 = x * x
        return x * (1.0 + x2 * (-1.0 / 3.0 + x2 * (2.0 / 15.0 + x2 * (-17.0 / 315.0 + x2 * (
            62.0 / 2835.0 - x2 * (1382.0 / 155925.0))))))
    # libm tanh is several times slower than exp here
    e = np.exp(-2.0 * abs(x))
    r = (1.0 - e) / (1.0 + e)
    return r if x > 0 else -r


@numba.njit(cache=True)
def _upwind(s, dm, dp):
    if s > 0:
        a = max(dm, 0.0)
        b = min(dp, 0.0)
    else:
        a = min(dm, 0.0)
        b = max(dp, 0.0)
    return a * a + b * b


@numba.njit(cache=True)
def _box_step_1d(u, ext, fv, out, dt, h, mid, rad, inv_eps, delta, beta, cap, z):
    n0 = u.shape[0]
    inv = 1.0 / h
    for i in range(n0 + 1):
        a = u[i - 1] if i > 0 else ext
        b = u[i] if i < n0 else ext
        p = (b - a) * inv
        z[i] = mid + rad * _tanh(rad * p * inv_eps) + delta * p
    for i in range(n0):
        c = u[i]
        w = u[i - 1] if i > 0 else ext
        e = u[i + 1] if i < n0 - 1 else ext
        xi = -(z[i + 1] - z[i]) * inv + fv[i]
        xi = min(max(xi, -cap), cap)
        s = beta * xi
        out[i] = c - dt * s * np.sqrt(_upwind(s, (c - w) * inv, (e - c) * inv))


@numba.njit(cache=True)
def _box_step_2d(u, ext, fv, out, dt, h, mid0, rad0, mid1, rad1, inv_eps, delta, beta, cap, zx, zy):
    n0, n1 = u.shape
    inv = 1.0 / h
    for i in range(n0 + 1):
        for j in range(n1):
            a = u[i - 1, j] if i > 0 else ext
            b = u[i, j] if i < n0 else ext
            p = (b - a) * inv
            zx[i, j] = mid0 + rad0 * _tanh(rad0 * p * inv_eps) + delta * p
    for i in range(n0):
        for j in range(n1 + 1):
            a = u[i, j - 1] if j > 0 else ext
            b = u[i, j] if j < n1 else ext
            p = (b - a) * inv
            zy[i, j] = mid1 + rad1 * _tanh(rad1 * p * inv_eps) + delta * p
    for i in range(n0):
        for j in range(n1):
            c = u[i, j]
            w = u[i - 1, j] if i > 0 else ext
            e = u[i + 1, j] if i < n0 - 1 else ext
            so = u[i, j - 1] if j > 0 else ext
            no = u[i, j + 1] if j < n1 - 1 else ext
            xi = -((zx[i + 1, j] - zx[i, j]) + (zy[i, j + 1] - zy[i, j])) * inv + fv[i, j]
            xi = min(max(xi, -cap), cap)
            s = beta * xi
            acc = _upwind(s, (c - w) * inv, (e - c) * inv) + _upwind(s, (c - so) * inv, (no - c) * inv)
            out[i, j] = c - dt * s * np.sqrt(acc)


def _box_step(u, ext, fv, dt, h, reg, M):
    out = np.empty_like(u)
    beta = float(M.beta_of(np.zeros((1, u.ndim))))
    cap = float(M.effective_cap)
    inv_eps = 1.0 / reg.eps
    fv = np.ascontiguousarray(fv, dtype=float)
    if u.ndim == 1:
        mid, rad = reg.axis_params(0)
        _box_step_1d(u, float(ext), fv, out, dt, h, mid, rad, inv_eps, reg.delta, beta, cap, np.empty(len(u) + 1))
    else:
        (m0, r0), (m1, r1) = reg.axis_params(0), reg.axis_params(1)
        n0, n1 = u.shape
        _box_step_2d(u, float(ext), fv, out, dt, h, m0, r0, m1, r1, inv_eps, reg.delta, beta, cap,
                     np.empty((n0 + 1, n1)), np.empty((n0, n1 + 1)))
    return out


def _pad(u, ext):
    return np.pad(u, 1, mode="constant", constant_values=ext)


def _face_differences(P, h):
    """One-sided differences on every face; ``P`` is padded by one layer."""
    if P.ndim == 1:
        return [np.diff(P) / h]
    px = (P[1:, 1:-1] - P[:-1, 1:-1]) / h
    py = (P[1:-1, 1:] - P[1:-1, :-1]) / h
    return [px, py]


def _face_flux(reg: SmoothQuadratic, P, faces, h):
    if reg.base.is_box():
        return [reg.axis_flux(d, p) for d, p in enumerate(faces)]
    if P.ndim == 1:
        return [reg.gradient(faces[0][:, None])[:, 0]]
    # transverse derivative averaged from the two cells sharing the face
    Q = np.pad(P, 1, mode="edge")
    cy = (Q[1:-1, 2:] - Q[1:-1, :-2]) / (2 * h)
    cx = (Q[2:, 1:-1] - Q[:-2, 1:-1]) / (2 * h)
    ty = 0.5 * (cy[1:, 1:-1] + cy[:-1, 1:-1])
    tx = 0.5 * (cx[1:-1, 1:] + cx[1:-1, :-1])
    zx = reg.gradient(np.stack([faces[0], ty[:, :]], axis=-1))[..., 0]
    zy = reg.gradient(np.stack([tx[:, :], faces[1]], axis=-1))[..., 1]
    return [zx, zy]


def _directions(P, h, delta_grad):
    """Unit normals from central differences, frozen to e_1 where the gradient is tiny."""
    if P.ndim == 1:
        g = (P[2:] - P[:-2])[:, None] / (2 * h)
    else:
        g = np.stack([(P[2:, 1:-1] - P[:-2, 1:-1]), (P[1:-1, 2:] - P[1:-1, :-2])], axis=-1) / (2 * h)
    nrm = np.linalg.norm(g, axis=-1, keepdims=True)
    e1 = np.zeros(g.shape[-1])
    e1[0] = 1.0
    return np.where(nrm >= delta_grad, g / np.where(nrm > 0, nrm, 1.0), e1)


def step_values(u: NDArray[np.float64], ext: float, h: float, reg: SmoothQuadratic, M: Mobility,
                fv: NDArray[np.float64], dt: float, delta_grad: float = 1e-8,
                use_kernel: bool = True) -> NDArray[np.float64]:
    """One explicit step on a constant-exterior array.

    Box Wulff shapes with direction-independent mobility go through a
    compiled loop; everything else through the vectorized path.
    """
    if use_kernel and M.constant and reg.base.is_box():
        return _box_step(np.ascontiguousarray(u, dtype=float), ext, fv, dt, h, reg, M)
    P = _pad(u, ext)
    faces = _face_differences(P, h)
    z = _face_flux(reg, P, faces, h)
    divz = sum(np.diff(zd, axis=d) for d, zd in enumerate(z)) / h
    xi = -divz + fv
    if M.constant:
        s = M(np.zeros(u.shape + (u.ndim,)), xi)
    else:
        s = M(_directions(P, h, delta_grad), xi)
    pos = s > 0
    acc = np.zeros_like(u)
    for d, p in enumerate(faces):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[d] = slice(None, -1)
        hi[d] = slice(1, None)
        dm, dp = p[tuple(lo)], p[tuple(hi)]
        a = np.where(pos, np.maximum(dm, 0.0), np.minimum(dm, 0.0))
        b = np.where(pos, np.minimum(dp, 0.0), np.maximum(dp, 0.0))
        acc = acc + a * a + b * b
    return u - dt * s * np.sqrt(acc)


# --- state and evolution ---------------------------------------------------------


@dataclass
class LevelSetState:
    u: ScalarField
    t: float = 0.0
    history: list[tuple[float, float, float, float, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.u.boundary != "constant":
            raise ValueError("level-set states use a constant exterior")


def _check_finite(arr, offset=(0, 0)):
    if not np.all(np.isfinite(arr)):
        bad = tuple(int(i) + o for i, o in zip(np.argwhere(~np.isfinite(arr))[0], offset))
        raise SchemeError(f"non-finite value produced at cell {bad}")


def step(s: LevelSetState, reg: SmoothQuadratic, M: Mobility, f: Forcing, dt: float,
         delta_grad: float = 1e-8) -> LevelSetState:
    fv = f.on_grid(s.u, s.t)
    new = step_values(s.u.values, s.u.exterior, s.u.h, reg, M, fv, dt, delta_grad)
    _check_finite(new)
    return LevelSetState(s.u.with_values(new), s.t + dt, list(s.history))


def lipschitz_monitor(s: LevelSetState | ScalarField | NDArray[np.float64], h: float | None = None) -> float:
    """max |u(x) - u(y)| / |x - y| over axis and diagonal neighbours."""
    if isinstance(s, LevelSetState):
        s = s.u
    if isinstance(s, ScalarField):
        return discrete_lipschitz(s.values, s.h)
    return discrete_lipschitz(np.asarray(s), float(h))


def _extent(mask):
    out = []
    for d in range(mask.ndim):
        other = tuple(k for k in range(mask.ndim) if k != d)
        idx = np.flatnonzero(mask.any(axis=other) if other else mask)
        out.append((int(idx[0]), int(idx[-1]) + 1))
    return out


def _active_box(u, ext, margin, guard, level):
    """Index bounds of cells whose value differs from the exterior, dilated by ``margin``.

    The guard band protects the tracked level set: if cells on the far
    side of ``level`` from the exterior come within ``guard`` cells of the
    box edge, the box is too small.  The thin tail that degenerate
    diffusion spreads off a clipped plateau may reach the edge; there the
    constant exterior acts as a Dirichlet condition.
    """
    diff = u != ext
    if not diff.any():
        return None
    if guard > 0:
        inside = u <= level if ext > level else u >= level
        if inside.any():
            for d, (lo, hi) in enumerate(_extent(inside)):
                if lo < guard or hi > u.shape[d] - guard:
                    raise DomainTooSmallError(
                        f"level {level:g} reached the {guard}-cell guard band along axis {d}; domain too small")
    return [(max(lo - margin, 0), min(hi + margin, u.shape[d])) for d, (lo, hi) in enumerate(_extent(diff))]


@dataclass
class Trajectory:
    times: list[float]
    frames: list[NDArray[np.float64]]
    diagnostics: list[dict]
    h: float
    origin: tuple[float, ...]
    exterior: float
    dt: float
    steps: int
    extinction_time: float | None = None

    def field(self, k: int) -> ScalarField:
        return ScalarField(self.frames[k], self.h, "constant", self.exterior, self.origin)


def evolve(u0: ScalarField, reg: SmoothQuadratic, M: Mobility, f: Forcing, T: float, emit_every: float,
           safety: float = 4.0, delta_grad: float | None = None, dt: float | None = None,
           anisotropy: Anisotropy | None = None, level: float = 0.0, guard: int = 3,
           refresh: int = 8, keep_frames: bool = True, on_step=None) -> Trajectory:
    """Repeated :func:`step` up to time ``T`` with frames every ``emit_every``.

    Work is confined to a bounding box of the non-constant region,
    refreshed every ``refresh`` steps; cells outside it are exact fixed
    points, so the result is identical to the full-grid iteration.
    """
    if u0.boundary != "constant":
        raise ValueError("initial data must use a constant exterior")
    if not u0.boundary_layer_ok():
        raise DomainTooSmallError("initial data is not constant on the boundary layer")
    h, ext, n = u0.h, u0.exterior, u0.n
    lip0 = lipschitz_monitor(u0)
    if delta_grad is None:
        delta_grad = 1e-8 * max(lip0, 1.0)
    Mgrowth = M.lipschitz * f.lipschitz
    if dt is None:
        dt = cfl_dt(reg, M, h, max(lip0, 1e-12) * np.exp(Mgrowth * T), n=n, safety=safety)
    A = anisotropy if anisotropy is not None else reg.base
    steps = int(np.ceil(T / dt - 1e-9))
    u = u0.values.copy()
    static_f = f.is_static
    fv_full = f.on_grid(u0) if static_f else None
    coords = u0.coords() if not static_f else None

    times, frames, diags = [], [], []
    extinction = None

    def record(t, arr):
        nonlocal extinction
        row = {"t": t, "lip": discrete_lipschitz(arr, h), "min": float(arr.min()), "max": float(arr.max()),
               "R_min": np.nan, "R_max": np.nan}
        if n == 2 and A is not None and arr.min() < level < arr.max():
            pts = extract_level_set(ScalarField(arr, h, "constant", ext, u0.origin), level)
            if len(pts):
                g = eval_polar(A, np.concatenate(pts))
                row["R_min"], row["R_max"] = float(g.min()), float(g.max())
        elif n == 2 and extinction is None and arr.min() >= level and times:
            extinction = t
        times.append(t)
        diags.append(row)
        if keep_frames:
            frames.append(arr.copy())

    record(0.0, u)
    next_emit = emit_every
    box = None
    for k in range(1, steps + 1):
        t = (k - 1) * dt
        if box is None or (k - 1) % refresh == 0:
            box = _active_box(u, ext, refresh + 2, guard, level)
        if box is not None:
            sl = tuple(slice(a, b) for a, b in box)
            fv = fv_full[sl] if static_f else f(coords[sl], t)
            # the last step is shortened to land on T; a smaller step keeps the CFL margin
            dt_k = dt if k < steps or T - t >= dt * (1 - 1e-9) else T - t
            new = step_values(u[sl], ext, h, reg, M, fv, dt_k, delta_grad)
            _check_finite(new, tuple(a for a, _ in box))
            u[sl] = new
        tk = k * dt if k < steps else T
        if on_step is not None:
            on_step(k, tk, u)
        if tk >= next_emit - 1e-12 * max(1.0, T) or k == steps:
            record(tk, u)
            while next_emit <= tk + 1e-12 * max(1.0, T):
                next_emit += emit_every
    return Trajectory(times, frames, diags, h, u0.origin, ext, dt, steps, extinction)


# --- diagnostics --------------------------------------------------------------------


def holder_fit(times, frames, probes, floor: float = 1e-12) -> dict:
    """Least-squares slope of ``log|u(x,t) - u(x,s)|`` against ``log|t - s|`` per probe.

    ``probes`` are index tuples.  Returns ``{"static": True}`` when no
    difference exceeds ``floor``.
    """
    if len(frames) < 8:
        raise ValueError("need at least 8 frames for a time-regularity fit")
    t = np.asarray(times, dtype=float)
    i, j = np.triu_indices(len(t), k=1)
    dt = t[j] - t[i]
    fits = []
    for pr in probes:
        vals = np.array([fr[tuple(pr)] for fr in frames])
        d = np.abs(vals[j] - vals[i])
        keep = (d > floor) & (dt > 0)
        if keep.sum() < 2:
            fits.append({"probe": tuple(int(v) for v in pr), "static": True})
            continue
        X = np.log(dt[keep])
        Y = np.log(d[keep])
        slope, icpt = np.polyfit(X, Y, 1)
        fits.append({"probe": tuple(int(v) for v in pr), "static": False, "exponent": float(slope),
                     "constant": float(np.exp(icpt))})
    if all(ft["static"] for ft in fits):
        return {"static": True, "fits": fits}
    live = [ft for ft in fits if not ft["static"]]
    return {"static": False, "fits": fits, "min_exponent": min(ft["exponent"] for ft in live)}


def compare_evolutions(u0: ScalarField, v0: ScalarField, reg: SmoothQuadratic, M: Mobility, f: Forcing, T: float,
                       safety: float = 4.0, dt: float | None = None) -> dict:
    """Evolve an ordered pair with a shared step size and report the worst ordering violation."""
    if np.any(u0.values > v0.values):
        raise ValueError("compare_evolutions expects u0 <= v0 cellwise")
    h = u0.h
    if dt is None:
        lip = max(lipschitz_monitor(u0), lipschitz_monitor(v0), 1e-12)
        dt = cfl_dt(reg, M, h, lip * np.exp(M.lipschitz * f.lipschitz * T), n=u0.n, safety=safety)
    u, v = u0.values.copy(), v0.values.copy()
    worst = 0.0
    min_gap = float(np.min(v - u))
    steps = int(np.ceil(T / dt - 1e-9))
    coords = u0.coords()
    for k in range(steps):
        fv = f(coords, k * dt)
        u = step_values(u, u0.exterior, h, reg, M, fv, dt)
        v = step_values(v, v0.exterior, h, reg, M, fv, dt)
        worst = max(worst, float(np.max(u - v)))
        min_gap = min(min_gap, float(np.min(v - u)))
    return {"violation": max(worst, 0.0), "min_gap": min_gap, "dt": dt, "steps": steps}


def extract_level_set(u: ScalarField, c: float) -> list[NDArray[np.float64]]:
    """Linear-interpolation level set: polylines in 2D, crossing points in 1D."""
    vals = u.values
    if not vals.min() < c < vals.max():
        raise ValueError(f"level {c} is outside the range ({vals.min():.6g}, {vals.max():.6g})")
    if u.n == 1:
        x = u.axes()[0]
        s = vals - c
        k = np.flatnonzero(np.sign(s[:-1]) != np.sign(s[1:]))
        w = s[k] / (s[k] - s[k + 1])
        return [np.array([x[k] + w * (x[k + 1] - x[k])]).T]
    from skimage.measure import find_contours

    # pad with the exterior so level sets touching the box close up
    P = np.pad(vals, 1, mode="constant", constant_values=u.exterior) if u.boundary == "constant" else vals
    off = 1 if u.boundary == "constant" else 0
    out = []
    for cnt in find_contours(P, c):
        out.append(np.asarray(u.origin) + (cnt - off + 0.5) * u.h)
    return out


def wulff_radius(traj: Trajectory, A: Anisotropy, level: float = 0.0) -> dict:
    """Gauge radius band ``(R_min, R_max)`` of the level set in each frame."""
    t_out, rmin, rmax = [], [], []
    extinction = None
    for t, fr in zip(traj.times, traj.frames):
        if not fr.min() < level < fr.max():
            extinction = t
            break
        pts = extract_level_set(ScalarField(fr, traj.h, "constant", traj.exterior, traj.origin), level)
        if not pts:
            extinction = t
            break
        g = eval_polar(A, np.concatenate(pts))
        t_out.append(t)
        rmin.append(float(g.min()))
        rmax.append(float(g.max()))
    return {"t": np.array(t_out), "R_min": np.array(rmin), "R_max": np.array(rmax), "extinction_time": extinction}


def wulff_initial(A: Anisotropy, R0: float, size: int, h: float, clip: float) -> ScalarField:
    """``min(sigma_polar(x) - R0, clip)`` on a centred box with exterior ``clip``."""
    grid = ScalarField(np.zeros((size,) * A.n), h, "constant", clip)
    vals = np.minimum(eval_polar(A, grid.coords()) - R0, clip)
    return grid.with_values(vals)
