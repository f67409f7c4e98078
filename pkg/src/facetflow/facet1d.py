"""Exact one-dimensional facet computations.

Discretization: a facet ``[x_-, x_+]`` is split into ``M`` cells of width
``h``; the dual field ``z`` lives on the ``M + 1`` edges and the speed on
cells is ``(z_{k+1} - z_k)/h - f_k``.  Writing ``y = z - F`` with ``F`` the
cumulative forcing, the speed is the slope of ``y`` and the constraint
``|z| <= 1`` becomes the tube ``Z_- <= y <= Z_+``.  Minimizing the sum of
squared speeds is the taut-string problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .fields import Forcing


class TubeError(ValueError):
    pass


class TopologyError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t = {t:.6g}")
        self.t = t


@dataclass(frozen=True)
class FacetProblem1D:
    """One facet with boundary values of the dual field.

    ``theta_minus`` / ``theta_plus`` are ``-1`` or ``+1`` (pinned) or
    ``None`` for a free end.  ``f_cells`` holds the forcing at cell
    centres; alternatively ``f_nodes`` holds it at edges and the cell value
    is the trapezoid average.
    """

    x_minus: float
    x_plus: float
    theta_minus: float | None
    theta_plus: float | None
    f_cells: NDArray[np.float64] | None = None
    f_nodes: NDArray[np.float64] | None = None

    def __post_init__(self):
        if not self.x_minus < self.x_plus:
            raise ValueError("facet interval must satisfy x_minus < x_plus")
        if (self.f_cells is None) == (self.f_nodes is None):
            raise ValueError("give exactly one of f_cells, f_nodes")
        for th in (self.theta_minus, self.theta_plus):
            if th is not None and not -1.0 <= th <= 1.0:
                raise TubeError(f"boundary value {th} lies outside [-1, 1]")
        arr = self.f_cells if self.f_cells is not None else self.f_nodes
        if not np.all(np.isfinite(arr)):
            raise ValueError("forcing samples must be finite")

    @classmethod
    def from_forcing(cls, f: Forcing, x_minus: float, x_plus: float, cells: int,
                     theta_minus=-1.0, theta_plus=1.0, layout: str = "cell", t: float = 0.0) -> FacetProblem1D:
        h = (x_plus - x_minus) / cells
        if layout == "cell":
            xc = x_minus + (np.arange(cells) + 0.5) * h
            return cls(x_minus, x_plus, theta_minus, theta_plus, f_cells=f(xc[:, None], t))
        if layout == "node":
            xe = x_minus + np.arange(cells + 1) * h
            return cls(x_minus, x_plus, theta_minus, theta_plus, f_nodes=f(xe[:, None], t))
        raise ValueError(f"unknown layout {layout!r}")

    @property
    def cells(self) -> int:
        return len(self.f_cells) if self.f_cells is not None else len(self.f_nodes) - 1

    @property
    def h(self) -> float:
        return (self.x_plus - self.x_minus) / self.cells

    def cell_forcing(self) -> NDArray[np.float64]:
        if self.f_cells is not None:
            return np.asarray(self.f_cells, dtype=float)
        fn = np.asarray(self.f_nodes, dtype=float)
        return 0.5 * (fn[1:] + fn[:-1])

    def edges(self) -> NDArray[np.float64]:
        return self.x_minus + np.arange(self.cells + 1) * self.h


@dataclass(frozen=True)
class Obstacles:
    x: NDArray[np.float64]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]
    cumulative: NDArray[np.float64]  # integral of f from the midpoint
    y_minus: float | None
    y_plus: float | None


def obstacles(p: FacetProblem1D) -> Obstacles:
    """Tube ``Z_+- = -int_{x0}^x f +- 1`` on the edges, plus pinned end heights."""
    fc = p.cell_forcing()
    F = np.concatenate([[0.0], np.cumsum(fc * p.h)])
    x = p.edges()
    F = F - np.interp(0.5 * (p.x_minus + p.x_plus), x, F)
    ym = None if p.theta_minus is None else p.theta_minus - F[0]
    yp = None if p.theta_plus is None else p.theta_plus - F[-1]
    return Obstacles(x, -F - 1.0, -F + 1.0, F, ym, yp)


@dataclass
class TautStringResult:
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    speed: NDArray[np.float64]  # per cell
    knots: list[int]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]

    @property
    def partition(self) -> list[tuple[int, int, float]]:
        return facet_partition(self, 1e-9)

    @property
    def z(self) -> NDArray[np.float64]:
        return self.y - 0.5 * (self.lower + self.upper)


def _first_conflict(lo_s, hi_s):
    """Index of the first entry where cummax(lo_s) > cummin(hi_s), or -1."""
    cmax = np.maximum.accumulate(lo_s)
    cmin = np.minimum.accumulate(hi_s)
    bad = np.flatnonzero(cmax > cmin)
    return (int(bad[0]) if bad.size else -1), cmax, cmin


def _last_argmin(v):
    m = v.min()
    return int(np.flatnonzero(v == m)[-1])


def _last_argmax(v):
    m = v.max()
    return int(np.flatnonzero(v == m)[-1])


def taut_string(lower: NDArray[np.float64], upper: NDArray[np.float64], y_minus: float | None,
                y_plus: float | None, h: float = 1.0, x: NDArray[np.float64] | None = None) -> TautStringResult:
    """Shortest path through the tube ``lower <= y <= upper`` sampled at ``M + 1`` edges.

    ``y_minus`` / ``y_plus`` pin the end heights; ``None`` leaves an end
    free (the string then leaves it horizontally).
    """
    lo = np.asarray(lower, dtype=float).copy()
    hi = np.asarray(upper, dtype=float).copy()
    M = len(lo) - 1
    if M < 1 or hi.shape != lo.shape:
        raise TubeError("tube needs at least two matching edge samples")
    if np.any(lo > hi):
        raise TubeError("empty tube: lower obstacle above upper obstacle")
    for end, val in ((0, y_minus), (M, y_plus)):
        if val is not None:
            if not lo[end] - 1e-12 <= val <= hi[end] + 1e-12:
                raise TubeError(f"pinned end value {val} outside the tube at edge {end}")
            lo[end] = hi[end] = val

    knots: list[int] = []
    heights: list[float] = []
    if y_minus is None:
        j0, y0 = _free_start(lo, hi, y_plus is None)
    else:
        j0, y0 = 0, float(lo[0])
    if j0 > 0:
        knots.append(0)
        heights.append(y0)
    knots.append(j0)
    heights.append(y0)

    while j0 < M:
        idx = np.arange(j0 + 1, M + 1)
        run = (idx - j0).astype(float)
        lo_s = (lo[j0 + 1:] - y0) / run
        hi_s = (hi[j0 + 1:] - y0) / run
        k, cmax, cmin = _first_conflict(lo_s, hi_s)
        if k >= 0:
            if k > 0 and cmax[k] > cmax[k - 1]:
                b = _last_argmin(hi_s[:k])
                yb = hi[j0 + 1 + b]
            else:
                b = _last_argmax(lo_s[:k])
                yb = lo[j0 + 1 + b]
            j0, y0 = j0 + 1 + b, float(yb)
        elif y_plus is None:
            # free right end: the last segment is as flat as the funnel allows
            if cmin[-1] < 0.0:
                b = _last_argmin(hi_s)
                j_new, y_new = j0 + 1 + b, float(hi[j0 + 1 + b])
            elif cmax[-1] > 0.0:
                b = _last_argmax(lo_s)
                j_new, y_new = j0 + 1 + b, float(lo[j0 + 1 + b])
            else:
                j_new, y_new = M, y0
            j0, y0 = j_new, y_new
        else:
            j0, y0 = M, float(lo[M])
        knots.append(j0)
        heights.append(y0)

    kn = np.asarray(knots)
    y = np.interp(np.arange(M + 1), kn, np.asarray(heights))
    speed = np.empty(M)
    for a, b, ya, yb in zip(knots[:-1], knots[1:], heights[:-1], heights[1:]):
        if b > a:
            speed[a:b] = (yb - ya) / ((b - a) * h)
    xs = np.arange(M + 1) * h if x is None else np.asarray(x, dtype=float)
    return TautStringResult(xs, y, speed, sorted(set(knots)), np.asarray(lower, float), np.asarray(upper, float))


def _free_start(lo, hi, right_free):
    """Horizontal start from a free left end: first knot and its height."""
    cmax = np.maximum.accumulate(lo)
    cmin = np.minimum.accumulate(hi)
    bad = np.flatnonzero(cmax > cmin)
    if bad.size == 0:
        # a horizontal line fits the whole tube
        if right_free:
            level = 0.5 * (cmax[-1] + cmin[-1])
            return len(lo) - 1, float(level)
        # right end pinned: it is inside [cmax, cmin] only if the run is flat throughout
        return len(lo) - 1, float(lo[-1])
    k = int(bad[0])
    if cmax[k] > cmax[k - 1]:
        b = _last_argmin(hi[:k])
        return b, float(hi[b])
    b = _last_argmax(lo[:k])
    return b, float(lo[b])


def solve_facet(p: FacetProblem1D) -> TautStringResult:
    ob = obstacles(p)
    return taut_string(ob.lower, ob.upper, ob.y_minus, ob.y_plus, p.h, ob.x)


def facet_partition(r: TautStringResult, tol: float) -> list[tuple[int, int, float]]:
    """Maximal runs of cells ``[start, stop)`` whose speed stays within ``tol`` of the run mean."""
    lam = [float(v) for v in r.speed]
    runs = []
    start, total, lo, hi = 0, lam[0], lam[0], lam[0]
    for k in range(1, len(lam)):
        v = lam[k]
        t2, lo2, hi2 = total + v, min(lo, v), max(hi, v)
        mean = t2 / (k - start + 1)
        if hi2 - mean <= tol and mean - lo2 <= tol:
            total, lo, hi = t2, lo2, hi2
            continue
        runs.append((start, k, total / (k - start)))
        start, total, lo, hi = k, v, v, v
    runs.append((start, len(lam), total / (len(lam) - start)))
    return runs



def periodic_zero_set_speeds(psi: NDArray[np.float64], fc: NDArray[np.float64], h: float,
                             thr: float = 0.0) -> NDArray[np.float64]:
    """Speed on the zero set of a periodic 1D profile, one taut string per run.

    Cells with ``|psi| <= thr`` form the zero set; the dual field at each
    run boundary is ``-sign`` of the left neighbour and ``sign`` of the right
    one.  Off the zero set the result is NaN.
    """
    psi = np.asarray(psi, dtype=float)
    fc = np.asarray(fc, dtype=float)
    zero = np.abs(psi) <= thr
    N = len(psi)
    out = np.full(N, np.nan)
    if zero.all():
        raise ValueError("zero set covers the whole periodic domain")
    # rotate so that index 0 is off the zero set; runs then never wrap
    r = int(np.flatnonzero(~zero)[0])
    zr, pr, fr = np.roll(zero, -r), np.roll(psi, -r), np.roll(fc, -r)
    edges = np.diff(zr.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    stops = np.flatnonzero(edges == -1) + 1
    if len(stops) < len(starts):
        stops = np.append(stops, N)
    for a, b in zip(starts, stops):
        th_m = -float(np.sign(pr[a - 1]))
        th_p = float(np.sign(pr[b % N]))
        p = FacetProblem1D(0.0, (b - a) * h, th_m, th_p, f_cells=fr[a:b])
        out[(np.arange(a, b) + r) % N] = solve_facet(p).speed
    return out


# --- facet length and explicit solution -------------------------------------


class MassError(ValueError):
    pass


def _ell_residual(f: Forcing, ell: float) -> float:
    return float(f.spatial(np.array([[ell]]))[0]) + 1.0 / ell - f.integrate_1d(-ell, ell) / (2.0 * ell)


def solve_ell(f: Forcing, h: float = 1e-3, tol: float = 1e-12) -> float:
    """Half-length of the facet that moves rigidly for even forcing, by bisection."""
    R = f.support_radius_1d()
    if not np.isfinite(R) or R <= 0:
        raise MassError("forcing must have compact, nonempty support")
    mass = f.integrate_1d(-R, R)
    if mass <= 2.0:
        raise MassError(f"no interior tangency: total forcing mass {mass:.6g} <= 2")
    a, b = min(h, 0.5 * R), R - min(h, 0.25 * R)
    ra, rb = _ell_residual(f, a), _ell_residual(f, b)
    if not (ra > 0 > rb):
        raise MassError(f"no sign change of the tangency residual on [{a:.3g}, {b:.3g}]")
    while b - a > tol:
        mid = 0.5 * (a + b)
        if _ell_residual(f, mid) > 0:
            a = mid
        else:
            b = mid
        if mid in (a, b) and b - a <= 4 * np.spacing(mid):
            break
    return 0.5 * (a + b)


def explicit_solution(f: Forcing, x, t: float, ell: float | None = None) -> NDArray[np.float64]:
    """``max(-f(x) t, -f(ell) t)``."""
    if ell is None:
        ell = solve_ell(f)
    fx = f(np.asarray(x, float)[..., None])
    fl = float(f(np.array([[ell]]))[0])
    return np.maximum(-fx * t, -fl * t)


# --- forward Euler facet evolution ------------------------------------------


@dataclass
class Trajectory1D:
    x: NDArray[np.float64]
    times: list[float]
    profiles: list[NDArray[np.float64]]


def facet_speeds(u: NDArray[np.float64], fc: NDArray[np.float64], h: float, flat: float) -> NDArray[np.float64]:
    """Speed on every cell of a 1D profile with free domain ends.

    Cells joined by edges with ``|du/dx| <= flat`` form facets; each
    facet's speed comes from a taut string whose end values are the signs of
    the adjacent slopes.
    """
    slope = np.diff(u) / h
    flat_edge = np.abs(slope) <= flat
    sgn = np.sign(slope)
    N = len(u)
    speed = np.empty(N)
    # runs of cells joined by flat edges
    breaks = np.flatnonzero(~flat_edge) + 1
    starts = np.concatenate([[0], breaks])
    stops = np.concatenate([breaks, [N]])
    single = (stops - starts) == 1
    s_idx = starts[single]
    zl = np.where(s_idx > 0, sgn[np.maximum(s_idx - 1, 0)], np.nan)
    zr = np.where(s_idx < N - 1, sgn[np.minimum(s_idx, N - 2)], np.nan)
    # a lone cell at a free domain end is a facet with one free end
    ok = ~np.isnan(zl) & ~np.isnan(zr)
    speed[s_idx[ok]] = (zr[ok] - zl[ok]) / h - fc[s_idx[ok]]
    todo = [(a, b) for a, b in zip(starts, stops) if b - a > 1]
    todo += [(int(a), int(a) + 1) for a in s_idx[~ok]]
    for a, b in todo:
        th_m = None if a == 0 else float(sgn[a - 1])
        th_p = None if b == N else float(sgn[b - 1])
        p = FacetProblem1D(0.0, (b - a) * h, th_m, th_p, f_cells=fc[a:b])
        speed[a:b] = solve_facet(p).speed
    return speed


def evolve_facet_ode(f: Forcing, T: float, dt: float, h: float, half_width: float,
                     u0: NDArray[np.float64] | None = None, emit_every: int = 1,
                     flat: float | None = None) -> Trajectory1D:
    """Forward Euler for ``u_t = speed`` on ``[-half_width, half_width]`` with free ends."""
    N = int(round(2 * half_width / h))
    x = -half_width + (np.arange(N) + 0.5) * h
    u = np.zeros(N) if u0 is None else np.asarray(u0, dtype=float).copy()
    flat = h if flat is None else flat
    steps = int(round(T / dt))
    times, profiles = [0.0], [u.copy()]
    for k in range(1, steps + 1):
        t = (k - 1) * dt
        fc = f(x[:, None], t)
        before = np.diff(u) / h
        speed = facet_speeds(u, fc, h, flat)
        u = u + dt * speed
        after = np.diff(u) / h
        flipped = (np.abs(before) > flat) & (np.sign(after) == -np.sign(before)) & (np.abs(after) > flat)
        if flipped.any():
            j = int(np.flatnonzero(flipped)[0])
            raise TopologyError(f"slope sign flip across edge {j} (facet collision below grid resolution)", k * dt)
        if k % emit_every == 0 or k == steps:
            times.append(k * dt)
            profiles.append(u.copy())
    return Trajectory1D(x, times, profiles)


# --- nonexistence certificate --------------------------------------------------


def nonexistence_certificate(f: Forcing, cells: int = 2000, longer: float = 1.25) -> dict:
    """Check the hypotheses and build the two-part certificate for ``f``.

    The facet operand is computed with the forcing kept outside the
    minimal divergence, i.e. for the velocity law ``-speed_0 + f(x)``.
    """
    R = f.support_radius_1d()
    nodes = np.unique(np.concatenate([f.breakpoints_1d(), np.linspace(-R, R, 2001)])) if np.isfinite(R) and R > 0 else np.array([0.0])
    vals = f.spatial(nodes[:, None])
    report: dict = {"support_radius": float(R) if np.isfinite(R) else None}
    hyp = []
    if np.any(vals < -1e-15):
        hyp.append("f must be nonnegative")
    fmax = float(vals.max()) if vals.size else 0.0
    if fmax <= 0:
        hyp.append("f must not vanish identically")
    if f.offset != 0.0:
        hyp.append("f must have compact support")
    if hyp:
        report.update(hypotheses_met=False, reasons=hyp, verdict="hypotheses not met")
        return report
    L = 1.0 / fmax
    report.update(max_f=fmax, L=L)
    if not R < L:
        report.update(hypotheses_met=False, reasons=[f"support [-{R:.6g}, {R:.6g}] not inside (-L, L) with L = {L:.6g}"],
                      verdict="hypotheses not met")
        return report

    def facet_speed0(half):
        p = FacetProblem1D(-half, half, -1.0, 1.0, f_cells=np.zeros(cells))
        return solve_facet(p).speed

    lam_barrier = facet_speed0(L)
    lp = longer * L
    lam_long = facet_speed0(lp)
    xc = -lp + (np.arange(cells) + 0.5) * (2 * lp / cells)
    excess = -lam_long + f(xc[:, None])
    k = int(np.argmax(excess))
    barrier_ok = bool(lam_barrier.min() >= fmax - 1e-3)
    long_ok = bool(excess[k] >= 1e-3)
    report.update(
        hypotheses_met=True,
        barrier={"half_length": L, "speed_min": float(lam_barrier.min()), "speed_max": float(lam_barrier.max()),
                 "max_of_minus_speed_plus_f": float(np.max(-lam_barrier + fmax))},
        longer_facet={"half_length": lp, "speed": float(lam_long.mean()), "witness_x": float(xc[k]),
                      "witness_value": float(excess[k])},
        verdict="certificate issued" if barrier_ok and long_ok else "certificate incomplete",
    )
    return report
