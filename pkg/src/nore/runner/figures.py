"""Self-contained SVG figures built from the sweep CSVs.

* ``heatmap_<cell>.svg``  episodes x categories, grayscale (max white, min black)
* ``exploration.svg``     Hausdorff distribution per volatility level and mechanism
                           (min / quartiles / max whiskers)
* ``entropy.svg``         preference entropy per episode, one panel per reset period
                           (first seed only)
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from collections import defaultdict
from pathlib import Path

import numpy as np

from .config import volatility_label

COLORS = {"baseline-G": "#c0392b", "pepper": "#2e64b5", "nore": "#2e9e4f"}
_FALLBACK = "#555555"


def _svg(width: float, height: float) -> ET.Element:
    return ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=f"{width:g}",
                      height=f"{height:g}", viewBox=f"0 0 {width:g} {height:g}")


def _text(parent, x, y, s, size=11, anchor="start", **kw) -> None:
    el = ET.SubElement(parent, "text", x=f"{x:.2f}", y=f"{y:.2f}", fill="#000",
                       **{"font-size": str(size), "font-family": "sans-serif",
                          "text-anchor": anchor}, **kw)
    el.text = s


def _write(root: ET.Element, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)
    return path


def gray(value: float, lo: float, hi: float) -> str:
    """Map ``lo`` to black and ``hi`` to white."""
    t = 0.5 if hi <= lo else (value - lo) / (hi - lo)
    v = int(round(255 * min(max(t, 0.0), 1.0)))
    return f"#{v:02x}{v:02x}{v:02x}"


def heatmap_svg(matrix: np.ndarray, path, title: str = "", cell: float = 8.0) -> Path:
    """Rows are episodes, columns categories.  One ``rect`` per cell."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.size == 0:
        raise ValueError("empty heatmap")
    n_ep, n_cat = m.shape
    left, top = 50.0, 30.0
    root = _svg(left + n_cat * cell + 20, top + n_ep * cell + 40)
    _text(root, left, 18, title, 12)
    lo, hi = float(m.min()), float(m.max())
    g = ET.SubElement(root, "g", {"class": "cells"})
    for i in range(n_ep):
        for j in range(n_cat):
            ET.SubElement(g, "rect", x=f"{left + j * cell:.2f}", y=f"{top + i * cell:.2f}",
                          width=f"{cell:g}", height=f"{cell:g}", fill=gray(m[i, j], lo, hi))
    _text(root, left, top + n_ep * cell + 16, "state category", 10)
    _text(root, 8, top + 10, "episode", 10)
    _text(root, left, top + n_ep * cell + 30, f"black={lo:.3g}  white={hi:.3g}", 9)
    return _write(root, Path(path))


def whisker_svg(groups: dict, path, title: str = "", ylabel: str = "Hausdorff distance") -> Path:
    """``groups`` maps volatility label -> {mechanism: values}."""
    if not groups:
        raise ValueError("no data to plot")
    labels = list(groups)
    mechs = sorted({m for g in groups.values() for m in g})
    all_vals = np.concatenate([np.asarray(v, float) for g in groups.values() for v in g.values()])
    lo, hi = float(all_vals.min()), float(all_vals.max())
    hi = hi if hi > lo else lo + 1.0
    W, H, left, top, bottom = 120 * len(labels) + 80, 320.0, 60.0, 30.0, 50.0
    root = _svg(W, H)
    _text(root, left, 18, title, 12)
    plot_h = H - top - bottom
    y = lambda v: top + plot_h * (1 - (v - lo) / (hi - lo))
    ET.SubElement(root, "line", x1=f"{left}", y1=f"{top}", x2=f"{left}", y2=f"{top + plot_h}",
                  stroke="#000")
    for v in np.linspace(lo, hi, 5):
        _text(root, left - 4, y(v) + 3, f"{v:.2f}", 9, "end")
    _text(root, 12, top + plot_h / 2, ylabel, 10, "middle",
          transform=f"rotate(-90 12 {top + plot_h / 2:.1f})")
    slot = (W - left - 20) / len(labels)
    for gi, lab in enumerate(labels):
        x0 = left + gi * slot
        _text(root, x0 + slot / 2, H - bottom + 18, lab, 10, "middle")
        width = slot / (len(mechs) + 1)
        for mi, mech in enumerate(mechs):
            vals = groups[lab].get(mech)
            if vals is None or len(vals) == 0:
                continue
            q0, q1, q2, q3, q4 = np.percentile(vals, [0, 25, 50, 75, 100])
            cx = x0 + width * (mi + 1)
            col = COLORS.get(mech, _FALLBACK)
            g = ET.SubElement(root, "g", {"class": f"box {mech}"})
            ET.SubElement(g, "line", x1=f"{cx:.2f}", x2=f"{cx:.2f}", y1=f"{y(q0):.2f}",
                          y2=f"{y(q4):.2f}", stroke=col)
            ET.SubElement(g, "rect", x=f"{cx - width * 0.3:.2f}", y=f"{y(q3):.2f}",
                          width=f"{width * 0.6:.2f}", height=f"{max(y(q1) - y(q3), 0.5):.2f}",
                          fill=col, **{"fill-opacity": "0.5"}, stroke=col)
            ET.SubElement(g, "line", x1=f"{cx - width * 0.3:.2f}", x2=f"{cx + width * 0.3:.2f}",
                          y1=f"{y(q2):.2f}", y2=f"{y(q2):.2f}", stroke="#000")
    _legend(root, mechs, W - 110, top)
    return _write(root, Path(path))


def lines_svg(panels: dict, path, title: str = "", ylabel: str = "entropy (nats)") -> Path:
    """``panels`` maps panel label -> {mechanism: sequence of y values}."""
    if not panels:
        raise ValueError("no data to plot")
    mechs = sorted({m for p in panels.values() for m in p})
    all_vals = np.concatenate([np.asarray(v, float) for p in panels.values() for v in p.values()])
    lo, hi = float(all_vals.min()), float(all_vals.max())
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    pw, ph, pad = 220.0, 160.0, 50.0
    W = pad + len(panels) * (pw + 20) + 110
    H = ph + 90
    root = _svg(W, H)
    _text(root, pad, 18, title, 12)
    top = 35.0
    for pi, (lab, series) in enumerate(panels.items()):
        x0 = pad + pi * (pw + 20)
        g = ET.SubElement(root, "g", {"class": "panel"})
        ET.SubElement(g, "rect", x=f"{x0:.2f}", y=f"{top}", width=f"{pw}", height=f"{ph}",
                      fill="none", stroke="#888")
        _text(g, x0 + pw / 2, top + ph + 28, lab, 10, "middle")
        n = max(len(v) for v in series.values())
        for mech in mechs:
            vals = np.asarray(series.get(mech, []), float)
            if vals.size == 0:
                continue
            xs = x0 + pw * (np.arange(len(vals)) / max(n - 1, 1))
            ys = top + ph * (1 - (vals - lo) / (hi - lo))
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
            ET.SubElement(g, "polyline", points=pts, fill="none",
                          stroke=COLORS.get(mech, _FALLBACK), **{"stroke-width": "1.5",
                                                                  "class": f"series {mech}"})
        _text(g, x0 + pw / 2, top + ph + 14, "episode", 9, "middle")
    _text(root, pad - 4, top + 8, f"{hi:.2f}", 9, "end")
    _text(root, pad - 4, top + ph, f"{lo:.2f}", 9, "end")
    _text(root, 12, top + ph / 2, ylabel, 10, "middle", transform=f"rotate(-90 12 {top + ph / 2})")
    _legend(root, mechs, W - 100, top)
    return _write(root, Path(path))


def _legend(root, mechs, x, y) -> None:
    for i, m in enumerate(mechs):
        ET.SubElement(root, "rect", x=f"{x:.2f}", y=f"{y + 16 * i:.2f}", width="10", height="10",
                      fill=COLORS.get(m, _FALLBACK))
        _text(root, x + 14, y + 16 * i + 9, m, 10)


def _period_key(p: str):
    return (0, 0) if p == "never" else (1, -int(p))


def emit_figures(out_dir) -> dict:
    """Build every figure from ``exploration.csv``, ``entropy.csv`` and ``preferences.csv``."""
    from .experiment import read_csv

    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    files = {}
    paths = {k: out_dir / f"{k}.csv" for k in ("exploration", "entropy", "preferences")}
    for k, p in paths.items():
        if not p.exists():
            raise FileNotFoundError(f"missing {p}")

    prefs = read_csv(paths["preferences"])
    if not prefs:
        raise ValueError("no preference rows to plot")
    cells = defaultdict(list)
    for r in prefs:
        cells[(r["mechanism"], r["reset_period"], r["seed"])].append(r)
    for (mech, period, seed), rows in sorted(cells.items()):
        rows.sort(key=lambda r: int(r["episode"]))
        cols = [k for k in rows[0] if k.startswith("c")]
        mat = np.array([[float(r[c]) for c in cols] for r in rows])
        name = f"heatmap_{mech}_p{period}_s{seed}"
        files[name] = str(heatmap_svg(mat, fig_dir / f"{name}.svg",
                                      f"{mech} preferences, reset period {period}"))

    expl = read_csv(paths["exploration"])
    groups: dict = defaultdict(lambda: defaultdict(list))
    for r in sorted(expl, key=lambda r: _period_key(r["reset_period"])):
        lab = f"{r['volatility']} (every {r['reset_period']})"
        groups[lab][r["mechanism"]].append(float(r["hausdorff"]))
    if groups:
        files["fig_exploration"] = str(whisker_svg(groups, fig_dir / "exploration.svg",
                                                   "Exploration by volatility"))

    ent = read_csv(paths["entropy"])
    panels: dict = defaultdict(lambda: defaultdict(list))
    first_seed = min((int(r["seed"]) for r in ent), default=0)
    for r in sorted(ent, key=lambda r: (_period_key(r["reset_period"]), r["mechanism"],
                                        int(r["seed"]), int(r["episode"]))):
        lab = f"{r['volatility']} (every {r['reset_period']})"
        if int(r["seed"]) == first_seed:
            panels[lab][r["mechanism"]].append(float(r["entropy"]))
    files["fig_entropy"] = str(lines_svg(panels, fig_dir / "entropy.svg",
                                         "Preference entropy over episodes"))
    return files


__all__ = ["emit_figures", "gray", "heatmap_svg", "lines_svg", "volatility_label", "whisker_svg"]
