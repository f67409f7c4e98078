"""Artifact files: CSV (canonical), SVG (derived, never read back), manifest."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

_FMT = "%.17g"
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _ensure_dir(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path.parent}: {exc}") from exc


def write_csv(path: str | os.PathLike, header: Sequence[str], columns: Sequence[Any]) -> Path:
    """Columns of equal length written with round-trip precision."""
    path = Path(path)
    _ensure_dir(path)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len({c.size for c in cols}) > 1:
        raise ValueError("CSV columns must have equal length")
    data = np.column_stack(cols) if cols else np.empty((0, 0))
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=",".join(header), comments="")
    return path


def write_grid_csv(path: str | os.PathLike, values: np.ndarray) -> Path:
    """A 1D or 2D array as rows of numbers (no header)."""
    path = Path(path)
    _ensure_dir(path)
    np.savetxt(path, np.atleast_2d(values), fmt=_FMT, delimiter=",")
    return path


def read_csv(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


# --- SVG ---------------------------------------------------------------------


def _svg_document(polylines, title: str, equal_aspect: bool, width: int = 480, height: int = 360) -> str:
    pts = np.concatenate([np.asarray(p, float).reshape(-1, 2) for _, p in polylines if len(p)])
    finite = pts[np.all(np.isfinite(pts), axis=1)]
    if finite.size == 0:
        finite = np.zeros((1, 2))
    lo, hi = finite.min(axis=0), finite.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    pad = 36
    sx, sy = (width - 2 * pad) / span[0], (height - 2 * pad) / span[1]
    if equal_aspect:
        sx = sy = min(sx, sy)

    def tx(p):
        return pad + (p[:, 0] - lo[0]) * sx, height - pad - (p[:, 1] - lo[1]) * sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="13">{_esc(title)}</text>',
        f'<text x="{pad}" y="{height - 8}" font-family="sans-serif" font-size="10">x: [{lo[0]:.4g}, {hi[0]:.4g}]  y: [{lo[1]:.4g}, {hi[1]:.4g}]</text>',
    ]
    names = []
    for k, (name, p) in enumerate(polylines):
        p = np.asarray(p, float).reshape(-1, 2)
        p = p[np.all(np.isfinite(p), axis=1)]
        if len(p) == 0:
            continue
        X, Y = tx(p)
        color = _PALETTE[k % len(_PALETTE)] if name not in names else _PALETTE[names.index(name) % len(_PALETTE)]
        names.append(name)
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(X, Y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{coords}"><title>{_esc(name)}</title></polyline>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path: str | os.PathLike, polylines, title: str = "", equal_aspect: bool = False) -> Path:
    path = Path(path)
    _ensure_dir(path)
    path.write_text(_svg_document(polylines, title, equal_aspect), encoding="utf-8")
    return path


def emit_plot_data(series: Mapping[str, Any], path: str | os.PathLike, title: str = "",
                   equal_aspect: bool = False, svg: bool = True) -> Path:
    """Write ``series`` (name -> ``(x, y)`` or ``(k, 2)`` points) as a long-format CSV plus an SVG.

    The CSV has columns ``series, x, y`` with series numbered in the order
    given; the SVG draws one polyline per entry.
    """
    if not series:
        raise ValueError("series must be nonempty")
    path = Path(path)
    ids, xs, ys, polylines = [], [], [], []
    for k, (name, data) in enumerate(series.items()):
        if isinstance(data, tuple) and len(data) == 2:
            pts = np.column_stack([np.asarray(data[0], float).ravel(), np.asarray(data[1], float).ravel()])
        else:
            pts = np.asarray(data, float).reshape(-1, 2)
        ids.append(np.full(len(pts), k))
        xs.append(pts[:, 0])
        ys.append(pts[:, 1])
        polylines.append((str(name), pts))
    csv_path = path.with_suffix(".csv")
    write_csv(csv_path, ["series", "x", "y"], [np.concatenate(ids), np.concatenate(xs), np.concatenate(ys)])
    legend = csv_path.with_name(csv_path.stem + "_series.txt")
    legend.write_text("".join(f"{k},{name}\n" for k, name in enumerate(series)), encoding="utf-8")
    if svg:
        write_svg(path.with_suffix(".svg"), polylines, title, equal_aspect)
    return csv_path


def write_json(path: str | os.PathLike, obj: Any) -> Path:
    path = Path(path)
    _ensure_dir(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj
