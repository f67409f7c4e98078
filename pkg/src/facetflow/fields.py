"""Grid functions and driving forces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class ScalarField:
    """Cell-centred values on a uniform 1D or 2D grid.

    ``boundary`` is ``"periodic"`` or ``"constant"``; in the latter case
    ``exterior`` is the value assumed outside the box.  Cell ``i`` along an
    axis sits at ``origin + (i + 1/2) h``.
    """

    values: NDArray[np.float64]
    h: float
    boundary: str = "periodic"
    exterior: float = 0.0
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise ValueError(f"fields must be 1D or 2D, got ndim={v.ndim}")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise ValueError(f"non-finite value at cell {tuple(int(i) for i in bad)}")
        if self.h <= 0:
            raise ValueError("grid spacing h must be positive")
        if self.boundary not in ("periodic", "constant"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        object.__setattr__(self, "values", v)
        if self.origin is None:
            object.__setattr__(self, "origin", tuple(-0.5 * s * self.h for s in v.shape))
        else:
            object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def axes(self) -> list[NDArray[np.float64]]:
        return [o + (np.arange(s) + 0.5) * self.h for o, s in zip(self.origin, self.shape)]

    def coords(self) -> NDArray[np.float64]:
        """Cell centres, shape ``values.shape + (n,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def with_values(self, values: ArrayLike) -> ScalarField:
        return ScalarField(np.asarray(values, dtype=float), self.h, self.boundary, self.exterior, self.origin)

    def boundary_layer_ok(self, tol: float = 0.0) -> bool:
        if self.boundary != "constant":
            return True
        v = self.values
        edges = [v[0], v[-1]] if v.ndim == 1 else [v[0], v[-1], v[:, 0], v[:, -1]]
        return all(np.all(np.abs(np.atleast_1d(e) - self.exterior) <= tol) for e in edges)


def centered_grid(n: int, size: int, h: float, boundary: str = "periodic", exterior: float = 0.0, values=None) -> ScalarField:
    shape = (size,) * n
    vals = np.zeros(shape) if values is None else values
    return ScalarField(vals, h, boundary, exterior)


def discrete_lipschitz(values: NDArray[np.float64], h: float, periodic: bool = False, diagonal: bool = True) -> float:
    """max |u(x) - u(y)| / |x - y| over axis (and, in 2D, diagonal) neighbours."""
    u = np.asarray(values, dtype=float)
    best = 0.0
    shifts: list[tuple[tuple[int, ...], float]] = []
    if u.ndim == 1:
        shifts = [((1,), h)]
    else:
        shifts = [((1, 0), h), ((0, 1), h)]
        if diagonal:
            shifts += [((1, 1), np.sqrt(2) * h), ((1, -1), np.sqrt(2) * h)]
    for sh, dist in shifts:
        if periodic:
            d = np.roll(u, sh, axis=tuple(range(u.ndim))) - u
        else:
            sl_a, sl_b = [], []
            for s in sh:
                if s == 1:
                    sl_a.append(slice(1, None)); sl_b.append(slice(None, -1))
                elif s == -1:
                    sl_a.append(slice(None, -1)); sl_b.append(slice(1, None))
                else:
                    sl_a.append(slice(None)); sl_b.append(slice(None))
            d = u[tuple(sl_a)] - u[tuple(sl_b)]
        if d.size:
            best = max(best, float(np.max(np.abs(d))) / dist)
    return best


# --- forcing ----------------------------------------------------------------


@dataclass(frozen=True)
class Tent:
    c: float
    r: float = 1.0
    center: tuple[float, ...] = (0.0,)

    def profile(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        ctr = np.asarray(self.center, dtype=float)
        if ctr.size == 1 and x.shape[-1] > 1:
            ctr = np.full(x.shape[-1], ctr.item())
        d = np.linalg.norm(x - ctr, axis=-1)
        return self.c * np.maximum(0.0, 1.0 - d / self.r)


@dataclass(frozen=True)
class Forcing:
    """Driving force ``f(x, t) = scale(t) * (sum of profiles)(x) + offset``.

    ``kind`` is one of ``zero``, ``tent``, ``plateau``, ``tents``,
    ``tabulated``.  ``time_profile`` is either empty (static) or a sorted
    sequence of ``(t_start, scale)`` pairs.
    """

    kind: str = "zero"
    tents: tuple[Tent, ...] = ()
    plateau_inner: float = 0.0
    table_x: tuple[float, ...] = ()
    table_f: tuple[float, ...] = ()
    offset: float = 0.0
    time_profile: tuple[tuple[float, float], ...] = ()
    _lip: float = field(init=False, default=0.0)
    _sup: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.kind not in ("zero", "tent", "plateau", "tents", "tabulated"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        for tn in self.tents:
            if tn.r <= 0:
                raise ValueError("tent radius must be positive")
        scale = max([1.0] if not self.time_profile else [abs(s) for _, s in self.time_profile])
        if self.kind == "zero":
            lip, sup = 0.0, 0.0
        elif self.kind == "tabulated":
            tx, tf = np.asarray(self.table_x, float), np.asarray(self.table_f, float)
            if tx.size < 2 or tx.size != tf.size or np.any(np.diff(tx) <= 0):
                raise ValueError("tabulated forcing needs matching, strictly increasing samples")
            lip = float(np.max(np.abs(np.diff(tf) / np.diff(tx))))
            sup = float(np.max(np.abs(tf)))
        elif self.kind == "plateau":
            (tn,) = self.tents
            if not 0 <= self.plateau_inner < tn.r:
                raise ValueError("plateau needs 0 <= inner radius < outer radius")
            lip, sup = abs(tn.c) / (tn.r - self.plateau_inner), abs(tn.c)
        else:
            lip = sum(abs(tn.c) / tn.r for tn in self.tents)
            sup = sum(abs(tn.c) for tn in self.tents)
        object.__setattr__(self, "_lip", scale * lip)
        object.__setattr__(self, "_sup", scale * sup + abs(self.offset))

    # constructors
    @classmethod
    def zero(cls) -> Forcing:
        return cls("zero")

    @classmethod
    def tent(cls, c: float, r: float = 1.0, center: Sequence[float] = (0.0,), offset: float = 0.0) -> Forcing:
        return cls("tent", tents=(Tent(float(c), float(r), tuple(map(float, center))),), offset=offset)

    @classmethod
    def plateau(cls, c: float, inner: float, outer: float, center: Sequence[float] = (0.0,), offset: float = 0.0) -> Forcing:
        return cls("plateau", tents=(Tent(float(c), float(outer), tuple(map(float, center))),), plateau_inner=float(inner), offset=offset)

    @classmethod
    def tabulated(cls, x: ArrayLike, f: ArrayLike, offset: float = 0.0) -> Forcing:
        return cls("tabulated", table_x=tuple(np.asarray(x, float).tolist()), table_f=tuple(np.asarray(f, float).tolist()), offset=offset)

    @classmethod
    def sum_of_tents(cls, tents: Sequence[Tent], offset: float = 0.0) -> Forcing:
        return cls("tents", tents=tuple(tents), offset=offset)

    def shifted(self, c: float) -> Forcing:
        """Same forcing plus a constant."""
        return Forcing(self.kind, self.tents, self.plateau_inner, self.table_x, self.table_f,
                       self.offset + float(c), self.time_profile)

    def scaled(self, s: float) -> Forcing:
        s = float(s)
        return Forcing(self.kind, tuple(Tent(s * t.c, t.r, t.center) for t in self.tents), self.plateau_inner,
                       self.table_x, tuple(s * v for v in self.table_f), s * self.offset, self.time_profile)

    @property
    def lipschitz(self) -> float:
        return self._lip

    @property
    def sup_bound(self) -> float:
        return self._sup

    @property
    def is_static(self) -> bool:
        return len(self.time_profile) == 0

    def time_scale(self, t: float) -> float:
        s = 1.0
        for t0, val in self.time_profile:
            if t >= t0:
                s = val
        return s

    def spatial(self, x: ArrayLike) -> NDArray[np.float64]:
        """Static profile at points ``x`` of shape ``(..., n)`` (or 1D samples)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or (self.kind == "tabulated" and x.shape[-1:] != (1,)):
            x = x[..., None]
        if self.kind == "zero":
            out = np.zeros(x.shape[:-1])
        elif self.kind == "tabulated":
            out = np.interp(x[..., 0], self.table_x, self.table_f, left=self.table_f[0], right=self.table_f[-1])
        elif self.kind == "plateau":
            tn = self.tents[0]
            ctr = np.resize(np.asarray(tn.center, float), x.shape[-1])
            d = np.linalg.norm(x - ctr, axis=-1)
            ramp = (tn.r - d) / (tn.r - self.plateau_inner)
            out = tn.c * np.clip(ramp, 0.0, 1.0)
        else:
            out = np.zeros(x.shape[:-1])
            for tn in self.tents:
                out = out + tn.profile(x)
        return out + self.offset

    def __call__(self, x: ArrayLike, t: float = 0.0) -> NDArray[np.float64]:
        base = self.spatial(x)
        if self.is_static:
            return base
        return self.time_scale(t) * (base - self.offset) + self.offset

    def on_grid(self, grid: ScalarField, t: float = 0.0) -> NDArray[np.float64]:
        return self(grid.coords(), t)

    # 1D helpers ---------------------------------------------------------

    def breakpoints_1d(self) -> NDArray[np.float64]:
        """Kinks of the 1D profile; trapezoid rules through them integrate exactly."""
        pts: list[float] = []
        if self.kind == "tabulated":
            pts = list(self.table_x)
        else:
            for tn in self.tents:
                c0 = float(np.ravel(tn.center)[0])
                pts += [c0 - tn.r, c0, c0 + tn.r]
                if self.kind == "plateau":
                    pts += [c0 - self.plateau_inner, c0 + self.plateau_inner]
        return np.unique(np.asarray(pts, dtype=float))

    def support_radius_1d(self) -> float:
        """Smallest R with the profile (offset excluded) vanishing outside [-R, R]."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "tabulated":
            tx, tf = np.asarray(self.table_x), np.asarray(self.table_f)
            nz = np.flatnonzero(tf != 0)
            if nz.size == 0:
                return 0.0
            lo = tx[max(nz[0] - 1, 0)]
            hi = tx[min(nz[-1] + 1, tx.size - 1)]
            if tf[0] != 0 or tf[-1] != 0:
                return np.inf
            return float(max(abs(lo), abs(hi)))
        return float(max(abs(float(np.ravel(tn.center)[0])) + tn.r for tn in self.tents))

    def integrate_1d(self, a: float, b: float, extra_nodes: int = 0) -> float:
        """Exact integral over [a, b] of the (piecewise-linear) 1D profile."""
        if b <= a:
            return 0.0
        bp = self.breakpoints_1d()
        nodes = np.concatenate([[a, b], bp[(bp > a) & (bp < b)]])
        if extra_nodes:
            nodes = np.concatenate([nodes, np.linspace(a, b, extra_nodes)])
        nodes = np.unique(nodes)
        y = self.spatial(nodes[:, None])
        return float(0.5 * np.sum((y[1:] + y[:-1]) * np.diff(nodes)))
