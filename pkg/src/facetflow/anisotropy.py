"""Crystalline anisotropies represented by the vertices of their Wulff shape.

The anisotropy is the support function of the Wulff polytope ``W``::

    sigma(p) = max_k <w_k, p>

and its polar ``sigma_polar`` is the Minkowski gauge of ``W``.  Only
dimensions 1 and 2 are supported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

PRESETS: dict[str, list[list[float]]] = {
    "square": [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
    "diamond": [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
    "interval": [[-1.0], [1.0]],
}


class AnisotropyError(ValueError):
    pass


def _as_points(p: ArrayLike, n: int) -> NDArray[np.float64]:
    arr = np.asarray(p, dtype=float)
    if n == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != n:
        raise ValueError(f"expected points with last dimension {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Anisotropy:
    """Crystalline anisotropy given by the vertex list of its Wulff shape.

    Parameters
    ----------
    wulff_vertices
        Array of shape ``(K, n)`` with ``n`` in ``{1, 2}``.
    require_interior
        Check that the origin lies strictly inside the hull.  Sliced
        anisotropies are built with this turned off.
    """

    wulff_vertices: NDArray[np.float64]
    require_interior: bool = True
    symmetric_flag: bool = field(init=False)

    def __post_init__(self):
        w = np.array(self.wulff_vertices, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.ndim != 2 or w.shape[1] not in (1, 2):
            raise AnisotropyError(f"Wulff vertices must have shape (K, 1) or (K, 2), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise AnisotropyError("Wulff vertices must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "wulff_vertices", w)
        self._check_convex_position()
        object.__setattr__(self, "symmetric_flag", _closed_under_negation(w))

    @classmethod
    def preset(cls, name: str) -> Anisotropy:
        try:
            return cls(np.array(PRESETS[name]))
        except KeyError:
            raise AnisotropyError(
                f"unknown anisotropy preset {name!r}; choose from {sorted(PRESETS)}"
            ) from None

    @property
    def n(self) -> int:
        return self.wulff_vertices.shape[1]

    @property
    def scale(self) -> float:
        return float(np.max(np.linalg.norm(self.wulff_vertices, axis=1)))

    def _check_convex_position(self):
        w = self.wulff_vertices
        tol = 1e-12 * max(1.0, float(np.abs(w).max()))
        if self.n == 1:
            if len(w) != 2 or abs(w[0, 0] - w[1, 0]) <= tol:
                raise AnisotropyError("a 1D Wulff shape needs exactly two distinct vertices")
            if self.require_interior and not (w.min() < -tol and w.max() > tol):
                raise AnisotropyError("origin must lie strictly inside the Wulff shape")
            return
        if len(w) < 3:
            raise AnisotropyError("a 2D Wulff shape needs at least three vertices")
        order = _angular_order(w)
        ring = w[order]
        edges = np.roll(ring, -1, axis=0) - ring
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross <= tol * self.scale):
            raise AnisotropyError("Wulff vertices are not in strictly convex position")
        if self.require_interior:
            _, offsets = self.facets()
            if np.any(offsets <= tol):
                raise AnisotropyError("origin must lie strictly inside the Wulff shape")

    def hull_ring(self) -> NDArray[np.float64]:
        """Vertices sorted counter-clockwise (2D only)."""
        return self.wulff_vertices[_angular_order(self.wulff_vertices)]

    def facets(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Outward unit normals ``a_i`` and offsets ``b_i`` with ``W = {x : a_i.x <= b_i}``."""
        if self.n == 1:
            w = self.wulff_vertices[:, 0]
            return np.array([[1.0], [-1.0]]), np.array([w.max(), -w.min()])
        ring = self.hull_ring()
        edges = np.roll(ring, -1, axis=0) - ring
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        offsets = np.einsum("ij,ij->i", normals, ring)
        return normals, offsets

    def is_box(self) -> bool:
        """True when W is an axis-aligned box (so Wulff projection is a clamp)."""
        if self.n == 1:
            return True
        w = self.wulff_vertices
        if len(w) != 4:
            return False
        lo, hi = w.min(axis=0), w.max(axis=0)
        corners = {(a, b) for a in (lo[0], hi[0]) for b in (lo[1], hi[1])}
        return {tuple(v) for v in w} == corners

    def box_bounds(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        return self.wulff_vertices.min(axis=0), self.wulff_vertices.max(axis=0)

    def inradius(self) -> float:
        """min over unit directions of sigma, i.e. the lambda_minus constant."""
        _, offsets = self.facets()
        return float(offsets.min())

    # --- evaluation ------------------------------------------------------

    def sigma(self, p: ArrayLike) -> NDArray[np.float64]:
        return eval_sigma(self, p)

    def polar(self, x: ArrayLike) -> NDArray[np.float64]:
        return eval_polar(self, x)


def _angular_order(w: NDArray[np.float64]) -> NDArray[np.intp]:
    c = w.mean(axis=0)
    return np.argsort(np.arctan2(w[:, 1] - c[1], w[:, 0] - c[0]), kind="stable")


def _closed_under_negation(w: NDArray[np.float64]) -> bool:
    tol = 1e-12 * max(1.0, float(np.abs(w).max()))
    d = np.linalg.norm(w[:, None, :] + w[None, :, :], axis=-1)
    return bool(np.all(d.min(axis=1) <= tol))


def eval_sigma(A: Anisotropy, p: ArrayLike) -> NDArray[np.float64]:
    """``sigma(p) = max_k <w_k, p>``, vectorized over leading axes of ``p``."""
    pts = _as_points(p, A.n)
    return np.max(pts @ A.wulff_vertices.T, axis=-1)


def eval_polar(A: Anisotropy, x: ArrayLike) -> NDArray[np.float64]:
    """Gauge of the Wulff shape, ``min{t > 0 : x in tW}``.

    Computed from the facet inequalities ``a_i.x <= b_i`` as
    ``max_i a_i.x / b_i``.
    """
    if A.n > 2:
        raise AnisotropyError("polar gauge is implemented for n <= 2 only")
    normals, offsets = A.facets()
    if np.any(offsets <= 0):
        raise AnisotropyError("degenerate Wulff shape: origin not in the interior")
    pts = _as_points(x, A.n)
    return np.maximum(np.max((pts @ normals.T) / offsets, axis=-1), 0.0)


@dataclass(frozen=True)
class SubdifferentialFace:
    """Face ``conv{w_j : j active}`` of the Wulff shape exposed by ``base_gradient``.

    ``tangent`` has shape ``(k, n)`` (rows orthonormal, spanning the
    direction space of the face) and ``normal_space`` has shape
    ``(n - k, n)``.  ``sliced_vertices`` are the active vertices in the
    coordinates of ``tangent``.
    """

    base_gradient: NDArray[np.float64]
    active_vertices: NDArray[np.intp]
    dim: int
    tangent: NDArray[np.float64]
    normal_space: NDArray[np.float64]
    sliced_vertices: NDArray[np.float64]


def subdifferential_face(A: Anisotropy, p_hat: ArrayLike, tol: float | None = None) -> SubdifferentialFace:
    p = np.asarray(p_hat, dtype=float).reshape(A.n)
    vals = A.wulff_vertices @ p
    top = vals.max()
    if tol is None:
        tol = 1e-10 * float(np.abs(vals).max())
    active = np.flatnonzero(vals >= top - tol)
    pts = A.wulff_vertices[active]
    diffs = pts - pts[0]
    if len(active) > 1:
        _, sv, vt = np.linalg.svd(diffs)
        rank_tol = 1e-10 * max(1.0, A.scale)
        k = int(np.sum(sv > rank_tol))
    else:
        _, _, vt = np.linalg.svd(np.zeros((1, A.n)))
        k = 0
    # vt always is a full orthonormal basis of R^n
    if k == 0:
        vt = np.eye(A.n)
    tangent, normal_space = vt[:k], vt[k:]
    return SubdifferentialFace(
        base_gradient=p,
        active_vertices=active,
        dim=k,
        tangent=tangent,
        normal_space=normal_space,
        sliced_vertices=pts @ tangent.T,
    )


def slice_anisotropy(A: Anisotropy, p_hat: ArrayLike, tol: float | None = None) -> Anisotropy:
    """Sliced anisotropy on R^k, ``w -> max_{j active} <T* w_j, w>``."""
    face = subdifferential_face(A, p_hat, tol)
    if face.dim == 0:
        raise AnisotropyError("zero-dimensional face: nothing to slice")
    verts = face.sliced_vertices
    if face.dim == 1:
        verts = np.array([[verts.min()], [verts.max()]])
    return Anisotropy(verts, require_interior=False)


# --- gauge identity candidates --------------------------------------------


def cahn_hoffman_wulff(A: Anisotropy, x: ArrayLike, variant: Literal["gauge", "euclidean"] = "gauge"):
    """Candidate fields for ``grad sigma(grad sigma_polar(x))`` and their divergence.

    ``variant="gauge"`` returns ``x / sigma_polar(x)`` with divergence
    ``(n - 1) / sigma_polar(x)``; ``variant="euclidean"`` returns
    ``x / |x|`` with divergence ``(n - 1) / |x|``.
    """
    pts = _as_points(x, A.n)
    if variant == "gauge":
        r = eval_polar(A, pts)
    elif variant == "euclidean":
        r = np.linalg.norm(pts, axis=-1)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        return pts / r[..., None], (A.n - 1) / r


def shrinking_radius(R0: float, t: ArrayLike, n: int) -> NDArray[np.float64]:
    """Gauge radius of a Wulff shape under ``R' = -(n - 1) / R``."""
    return np.sqrt(np.maximum(R0**2 - 2.0 * (n - 1) * np.asarray(t, dtype=float), 0.0))


# --- smooth regularizations ------------------------------------------------


class RegularizedAnisotropy:
    """Common interface: ``value``, ``gradient`` and ``hessian`` on arrays ``(..., n)``."""

    mode: str
    m: int
    base: Anisotropy

    def value(self, p: ArrayLike) -> NDArray[np.float64]:
        raise NotImplementedError

    def gradient(self, p: ArrayLike) -> NDArray[np.float64]:
        raise NotImplementedError

    def hessian(self, p: ArrayLike) -> NDArray[np.float64]:
        raise NotImplementedError


class SmoothQuadratic(RegularizedAnisotropy):
    """Mode A: ``eps * logsumexp(<w_k, p> / eps) + (delta / 2) |p|^2``, ``eps = 1/m``.

    ``delta`` defaults to ``eps``.  The Hessian satisfies
    ``delta <= D^2 sigma_m <= hessian_upper`` with ``hessian_upper`` the
    Popoviciu bound ``diam(W)^2 / (4 eps) + delta`` (sharp per axis for
    boxes).
    """

    mode = "A"

    def __init__(self, base: Anisotropy, m: int, delta: float | None = None):
        if m < 1:
            raise ValueError("smoothing parameter m must be a positive integer")
        self.base = base
        self.m = int(m)
        self.eps = 1.0 / m
        self.delta = self.eps if delta is None else float(delta)
        if self.delta <= 0:
            raise ValueError("quadratic coefficient must be positive")
        w = base.wulff_vertices
        if base.is_box():
            lo, hi = base.box_bounds()
            spread = float(np.max((hi - lo) ** 2)) / 4.0
        else:
            diam2 = float(np.max(np.sum((w[:, None, :] - w[None, :, :]) ** 2, axis=-1)))
            spread = diam2 / 4.0
        self.hessian_upper = spread / self.eps + self.delta
        self.hessian_lower = self.delta

    @property
    def a_m(self) -> float:
        """Two-sided ellipticity constant: ``a^-1 <= D^2 sigma_m <= a``."""
        return max(self.hessian_upper, 1.0 / self.hessian_lower)

    def _weights(self, pts):
        s = pts @ self.base.wulff_vertices.T / self.eps
        smax = s.max(axis=-1, keepdims=True)
        e = np.exp(s - smax)
        tot = e.sum(axis=-1, keepdims=True)
        return e / tot, smax[..., 0] + np.log(tot[..., 0])

    def value(self, p):
        pts = _as_points(p, self.base.n)
        _, lse = self._weights(pts)
        return self.eps * lse + 0.5 * self.delta * np.sum(pts**2, axis=-1)

    def gradient(self, p):
        pts = _as_points(p, self.base.n)
        pi, _ = self._weights(pts)
        return pi @ self.base.wulff_vertices + self.delta * pts

    def hessian(self, p):
        pts = _as_points(p, self.base.n)
        w = self.base.wulff_vertices
        pi, _ = self._weights(pts)
        mean = pi @ w
        second = np.einsum("...k,ki,kj->...ij", pi, w, w)
        cov = second - mean[..., :, None] * mean[..., None, :]
        return cov / self.eps + self.delta * np.eye(self.base.n)

    def axis_flux(self, axis: int, p: NDArray[np.float64]) -> NDArray[np.float64]:
        """Component ``axis`` of the gradient for box Wulff shapes, as a function of ``p_axis`` alone."""
        mid, rad = self.axis_params(axis)
        return mid + rad * np.tanh(rad * p / self.eps) + self.delta * p

    def axis_params(self, axis: int) -> tuple[float, float]:
        """Centre and half-width of the box along ``axis``."""
        lo, hi = self.base.box_bounds()
        return 0.5 * float(lo[axis] + hi[axis]), 0.5 * float(hi[axis] - lo[axis])

    def axis_flux_derivative_bound(self, axis: int) -> float:
        lo, hi = self.base.box_bounds()
        return (hi[axis] - lo[axis]) ** 2 / (4.0 * self.eps) + self.delta


class OneHomogeneous(RegularizedAnisotropy):
    """Mode B: ``(sum_k |<w_k, p>|^{2m} + m^{-m} |p|^{2m})^{1/(2m)}``.

    Requires a centrally symmetric Wulff shape.  Evaluated as a scaled
    ``2m``-norm of the vector ``(<w_1,p>, ..., <w_K,p>, |p|/sqrt(m))``.
    """

    mode = "B"

    def __init__(self, base: Anisotropy, m: int):
        if not base.symmetric_flag:
            raise AnisotropyError("mode B regularization needs a centrally symmetric Wulff shape")
        if m < 1:
            raise ValueError("smoothing parameter m must be a positive integer")
        self.base = base
        self.m = int(m)
        K = len(base.wulff_vertices)
        self.lambda_minus = base.inradius()
        self.lambda_plus = (K + 1) ** (1.0 / (2 * m)) * max(base.scale, 1.0 / np.sqrt(m))

    def _entries(self, pts):
        v = pts @ self.base.wulff_vertices.T
        q = np.linalg.norm(pts, axis=-1) / np.sqrt(self.m)
        return v, q

    def value(self, p):
        pts = _as_points(p, self.base.n)
        v, q = self._entries(pts)
        entries = np.concatenate([np.abs(v), q[..., None]], axis=-1)
        top = entries.max(axis=-1)
        safe = np.where(top > 0, top, 1.0)
        s = np.sum((entries / safe[..., None]) ** (2 * self.m), axis=-1)
        return np.where(top > 0, safe * s ** (1.0 / (2 * self.m)), 0.0)

    def gradient(self, p):
        pts = _as_points(p, self.base.n)
        v, q = self._entries(pts)
        sig = self.value(pts)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = v / sig[..., None]
            rq = q / sig
            nrm = np.linalg.norm(pts, axis=-1)
            e = pts / nrm[..., None]
        k = 2 * self.m - 1
        g = (r**k) @ self.base.wulff_vertices + (rq**k)[..., None] * e / np.sqrt(self.m)
        return np.where((sig > 0)[..., None], g, 0.0)

    def hessian(self, p):
        pts = _as_points(p, self.base.n)
        n = self.base.n
        w = self.base.wulff_vertices
        v, q = self._entries(pts)
        sig = self.value(pts)
        if np.any(sig <= 0):
            raise ValueError("mode B Hessian is undefined at p = 0")
        r = v / sig[..., None]
        rq = q / sig
        nrm = np.linalg.norm(pts, axis=-1)
        e = pts / nrm[..., None]
        g = self.gradient(pts)
        k = 2 * self.m
        outer_w = np.einsum("...k,ki,kj->...ij", r ** (k - 2), w, w)
        ee = e[..., :, None] * e[..., None, :]
        core = outer_w + (rq ** (k - 2))[..., None, None] * ee / self.m - g[..., :, None] * g[..., None, :]
        iso = (rq ** (k - 1) / (np.sqrt(self.m) * nrm))[..., None, None] * (np.eye(n) - ee)
        return (k - 1) / sig[..., None, None] * core + iso


def regularize(A: Anisotropy, mode: str, m: int, **kwargs) -> RegularizedAnisotropy:
    if mode == "A":
        return SmoothQuadratic(A, m, **kwargs)
    if mode == "B":
        return OneHomogeneous(A, m)
    raise ValueError(f"unknown regularization mode {mode!r} (expected 'A' or 'B')")
