"""Seeded random cases for the property suites.

Every generator takes a ``numpy.random.Generator`` and returns plain
arrays or small dataclasses, so the same seed always rebuilds the same
cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .anisotropy import Anisotropy, eval_polar
from .fields import Forcing, ScalarField, Tent, centered_grid
from .facet1d import periodic_zero_set_speeds
from .tvprox import minimal_divergence


@dataclass
class FacetCase1D:
    psi: ScalarField  # periodic
    f: Forcing
    cells: slice  # the facet, before wrapping
    theta_minus: float
    theta_plus: float


def random_forcing_1d(rng: np.random.Generator, half_length: float, tents: int = 3, amp: float = 2.0) -> Forcing:
    """A few tents with supports inside ``(-half_length, half_length)``."""
    out = []
    for _ in range(tents):
        r = rng.uniform(0.15, 0.5) * half_length
        c0 = rng.uniform(-half_length + r, half_length - r)
        out.append(Tent(float(rng.uniform(-amp, amp)), float(r), (float(c0),)))
    return Forcing.sum_of_tents(out, offset=float(rng.uniform(-0.5, 0.5)))


def facet_profile_1d(N: int, h: float, start: int, width: int, theta_minus: float, theta_plus: float,
                     cap: float) -> NDArray[np.float64]:
    """Periodic profile vanishing exactly on cells ``start .. start+width-1``.

    The sign pattern next to the facet realizes the requested boundary
    values of the dual field: ``theta_plus`` is the sign to the right,
    ``-theta_minus`` the sign to the left.  Slopes are one outside a cap.
    """
    G = N - width
    if theta_plus == theta_minus and G % 2:
        raise ValueError("a step profile needs an even number of off-facet cells")
    s = (np.arange(G) + 0.5) * h
    Lg = G * h
    if theta_plus == -theta_minus:
        gap = theta_plus * np.minimum(np.minimum(s, Lg - s), cap)
    else:
        mid = 0.5 * Lg
        gap = theta_plus * np.sign(mid - s) * np.minimum(np.minimum(np.minimum(s, Lg - s), cap), np.abs(mid - s))
    vals = np.concatenate([np.zeros(width), gap])
    return np.roll(vals, start)


def random_facet_case_1d(rng: np.random.Generator, cells: tuple[int, int] = (64, 256), length: float = 4.0) -> FacetCase1D:
    N = int(rng.integers(cells[0] // 2, cells[1] // 2 + 1)) * 2
    h = length / N
    width = int(rng.integers(max(4, N // 8), N // 2)) // 2 * 2
    start = int(rng.integers(0, N))
    th_m, th_p = (float(v) for v in rng.choice([-1.0, 1.0], size=2))
    vals = facet_profile_1d(N, h, start, width, th_m, th_p, cap=rng.uniform(0.2, 0.6))
    psi = centered_grid(1, N, h, boundary="periodic", values=vals)
    return FacetCase1D(psi, random_forcing_1d(rng, 0.5 * length), slice(start, start + width), th_m, th_p)


def random_nested_pair_1d(rng: np.random.Generator, N: int = 128, length: float = 4.0):
    """``(psi1, psi2, f1, f2)`` with ``sign psi1 <= sign psi2`` and ``f1 >= f2``.

    ``psi2`` is a piecewise-linear profile with several flat pieces at
    different heights shifted so one flat sits at zero; truncating one of
    the pair at zero from above or below keeps the sign order, so the
    zero sets are nested.
    """
    h = length / N
    # nine segments of at least four cells: a one-cell valley has speed 2/h,
    # too fast for the larger resolvent steps to keep apart from its neighbours
    lengths = 4 + rng.multinomial(N - 36, np.full(9, 1.0 / 9))
    knots = np.cumsum(lengths)[:-1]
    # well separated heights keep every slope resolvable at the smallest step
    levels = rng.permutation([-0.45, -0.15, 0.15, 0.45]) + rng.uniform(-0.05, 0.05, size=4)
    prof = np.empty(N)
    seg = np.split(np.arange(N), knots)
    # alternate flats and ramps so that every flat has a neighbouring slope
    for k, idx in enumerate(seg):
        if k % 2 == 0:
            lv = levels[(k // 2) % len(levels)]
            prof[idx] = lv
        else:
            prof[idx] = np.nan
    good = ~np.isnan(prof)
    x = np.arange(N)
    # periodic linear interpolation across ramps
    xp = np.concatenate([x[good] - N, x[good], x[good] + N])
    fp = np.tile(prof[good], 3)
    prof = np.interp(x, xp, fp)
    # a middle height, so that both signs survive the truncations below
    base = prof - float(np.sort(levels)[rng.integers(1, 3)])
    # ramps crossing zero leave near-zero cells that only a tiny step resolves;
    # they join the zero set instead
    base = np.where(np.abs(base) < 0.05, 0.0, base)
    # same facet, a larger facet containing it, or one contained in it
    mode = int(rng.integers(0, 3))
    psi1, psi2 = base, base
    if mode == 1:
        psi2 = np.maximum(base, 0.0)
    elif mode == 2:
        psi1 = np.minimum(base, 0.0)
    f2 = random_forcing_1d(rng, 0.5 * length)
    bump = Tent(float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.2, 1.0)), (float(rng.uniform(-1.0, 1.0)),))
    f1 = Forcing.sum_of_tents(f2.tents + (bump,), offset=f2.offset + float(rng.uniform(0.0, 0.3)))
    mk = lambda v: centered_grid(1, N, h, boundary="periodic", values=v)  # noqa: E731
    return mk(psi1), mk(psi2), f1, f2


def wulff_facet_2d(A: Anisotropy, size: int, h: float, R: float, cap: float = 0.3) -> ScalarField:
    """``clip(sigma_polar(x) - R, 0, cap)`` on a periodic grid: a Wulff-shaped facet."""
    grid = centered_grid(2, size, h, boundary="periodic")
    vals = np.clip(eval_polar(A, grid.coords()) - R, 0.0, cap)
    return grid.with_values(vals)


def random_ordered_pair_2d(rng: np.random.Generator, A: Anisotropy, size: int, h: float, clip: float = 0.15):
    """``(u0, v0, f)`` on a box with exterior ``clip`` and ``u0 <= v0`` cellwise.

    ``u0`` is the clipped minimum of a few shifted gauge cones; ``v0`` adds
    a nonnegative bump (or a constant lift) and re-clips.
    """
    grid = ScalarField(np.zeros((size, size)), h, "constant", clip)
    x = grid.coords()
    half = 0.5 * size * h
    u = np.full((size, size), np.inf)
    for _ in range(int(rng.integers(1, 4))):
        c = rng.uniform(-0.2, 0.2, 2) * half
        u = np.minimum(u, eval_polar(A, x - c) - rng.uniform(0.15, 0.35) * half)
    u = np.minimum(u, clip)
    if rng.uniform() < 0.25:
        w = np.full_like(u, rng.uniform(0.0, 0.05))
    else:
        c = rng.uniform(-0.3, 0.3, 2) * half
        rho = rng.uniform(0.2, 0.5) * half
        w = rng.uniform(0.0, 0.2) * np.maximum(0.0, 1.0 - eval_polar(A, x - c) / rho)
    v = np.minimum(u + w, clip)
    f = Forcing.tent(float(rng.uniform(-2.0, 2.0)), float(rng.uniform(0.3, 0.8) * half),
                     tuple(float(v) for v in rng.uniform(-0.2, 0.2, 2) * half))
    return grid.with_values(u), grid.with_values(v), f


# --- checks ------------------------------------------------------------------


def oracle_gap_1d(case: FacetCase1D, A: Anisotropy, **kw) -> float:
    """``max |prox speed - taut-string speed|`` on the facet cells."""
    psi = case.psi
    fv = case.f.on_grid(psi)
    md = minimal_divergence(psi, case.f, A, **kw)
    exact = periodic_zero_set_speeds(psi.values, fv, psi.h)
    return float(np.max(np.abs(md.values - exact[md.cells])))
