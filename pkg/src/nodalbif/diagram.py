"""Deterministic SVG bifurcation diagrams.

Output is plain text assembled in a fixed order with fixed number
formatting, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

from .errors import SchemaError
from .grid import RadialFunction, make_grid

WIDTH, HEIGHT = 900, 560
MARGIN = {"left": 70, "right": 30, "top": 30, "bottom": 70}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
VERTICAL = ("sup_u", "sup_v", "h1_norm")


@dataclass(frozen=True)
class DiagramSpec:
    vertical: str = "sup_u"
    tables: tuple = ()  # BifurcationTable.to_dict() payloads, one per k
    beta_range: tuple[float, float] | None = None
    title: str = "bifurcation diagram"
    styles: dict = field(default_factory=lambda: {"U": "", "W": "6,4"})

    def __post_init__(self):
        if self.vertical not in VERTICAL:
            raise SchemaError(f"vertical axis must be one of {VERTICAL}")


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _require(cond: bool, msg: str):
    if not cond:
        raise SchemaError(msg)


def validate_branch(data) -> dict:
    """Check a branch payload against the branch JSON layout."""
    _require(isinstance(data, dict), "branch must be a JSON object")
    for key in ("family", "k", "i", "signature", "points"):
        _require(key in data, f"branch missing {key!r}")
    _require(data["family"] in ("U", "W"), f"unknown family {data['family']!r}")
    _require(all(isinstance(data[key], int) and data[key] >= 1 for key in ("k", "i")), "k, i must be positive integers")
    sig = data["signature"]
    _require(isinstance(sig, list) and len(sig) == 4 and all(isinstance(c, int) for c in sig),
             "signature must be 4 integers")
    _require(isinstance(data["points"], list), "points must be a list")
    for j, p in enumerate(data["points"]):
        _require(isinstance(p, dict), f"point {j} must be an object")
        for key in ("beta", "sup_u", "sup_v"):
            _require(isinstance(p.get(key), (int, float)) and math.isfinite(p[key]), f"point {j}: bad {key!r}")
        for key in ("u", "v"):
            if key in p:
                _require(isinstance(p[key], list), f"point {j}: {key!r} must be a list")
    return data


def load_branch_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return validate_branch(data)


def _h1(p: dict) -> float:
    if "u" not in p or "v" not in p:
        raise SchemaError("h1_norm axis needs profiles; branch was written with profiles elided")
    grid = make_grid(len(p["u"]))
    u, v = RadialFunction(grid, p["u"]), RadialFunction(grid, p["v"])
    return math.hypot(u.h1_norm(), v.h1_norm())


def _vertical(p: dict, axis: str) -> float:
    return _h1(p) if axis == "h1_norm" else float(p[axis])


def _markers(tables) -> list[dict]:
    out = []
    for t in tables:
        k = int(t["k"])
        for row in t["rows"]:
            i = int(row["i"])
            if i == k:
                out.append({"kind": "circle", "k": k, "i": i, "beta": 1.0, "label": f"circle k={k}"})
                continue
            out.append({"kind": "beta", "k": k, "i": i, "beta": float(row["beta"]), "label": f"β{k},{i}"})
            out.append({"kind": "beta_tilde", "k": k, "i": i, "beta": float(row["beta_tilde"]),
                        "label": f"β̃{k},{i}"})
    return out


def render_svg(spec: DiagramSpec, branches: list[dict]) -> str:
    branches = sorted((validate_branch(b) for b in branches), key=lambda b: (b["family"], b["k"], b["i"]))
    markers = _markers(spec.tables)
    curves = [[(float(p["beta"]), _vertical(p, spec.vertical)) for p in b["points"]] for b in branches]

    xs = [x for c in curves for x, _ in c] + [m["beta"] for m in markers]
    if spec.beta_range is not None:
        x0, x1 = spec.beta_range
    elif xs:
        x0, x1 = min(xs), max(xs)
    else:
        x0, x1 = -1.0, 4.0
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.04 * (x1 - x0)
    x0, x1 = x0 - pad, x1 + pad
    ys = [y for c in curves for _, y in c]
    y1 = max(ys) * 1.05 if ys else 1.0
    y1 = y1 if y1 > 0 else 1.0

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + ph - y / y1 * ph

    base = sy(0.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(spec.title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        '<g id="axes" stroke="black" stroke-width="1">',
        f'<line x1="{_fmt(sx(x0))}" y1="{_fmt(base)}" x2="{_fmt(sx(x1))}" y2="{_fmt(base)}"/>',
        f'<line x1="{_fmt(sx(x0))}" y1="{_fmt(base)}" x2="{_fmt(sx(x0))}" y2="{_fmt(sy(y1))}"/>',
        "</g>",
        '<g id="ticks" font-size="10">',
    ]
    step = _nice_step(x1 - x0)
    t = math.ceil(x0 / step) * step
    while t <= x1 + 1e-12:
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{_fmt(base)}" x2="{_fmt(sx(t))}" y2="{_fmt(base + 4)}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{_fmt(base + 16)}" text-anchor="middle">{_tick(t)}</text>')
        t += step
    out.append("</g>")
    out.append(f'<text x="{_fmt(MARGIN["left"] + pw / 2)}" y="{HEIGHT - 12}" text-anchor="middle">β</text>')
    out.append(f'<text x="16" y="{_fmt(MARGIN["top"] + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_fmt(MARGIN["top"] + ph / 2)})">{escape(spec.vertical)}</text>')

    out.append('<g id="branches" fill="none" stroke-width="1.5">')
    for b, c in zip(branches, curves):
        color = PALETTE[(b["k"] - 1) % len(PALETTE)]
        dash = spec.styles.get(b["family"], "")
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in c)
        name = f'{b["family"]}({b["k"]},{b["i"]})'
        out.append(f'<polyline class="branch" data-family="{b["family"]}" data-k="{b["k"]}" data-i="{b["i"]}" '
                   f'stroke="{color}"{dash_attr} points="{pts}"><title>{escape(name)}</title></polyline>')
    out.append("</g>")

    out.append('<g id="markers">')
    for m in sorted(markers, key=lambda m: (m["k"], m["kind"], m["i"])):
        x = sx(m["beta"])
        color = PALETTE[(m["k"] - 1) % len(PALETTE)]
        attrs = (f'class="marker" data-kind="{m["kind"]}" data-k="{m["k"]}" data-i="{m["i"]}" '
                 f'data-beta={quoteattr(repr(m["beta"]))}')
        if m["kind"] == "circle":
            out.append(f'<circle {attrs} cx="{_fmt(x)}" cy="{_fmt(base)}" r="6" fill="none" stroke="{color}"/>')
            continue
        dy = 8 if m["kind"] == "beta" else -8
        tri = f"{_fmt(x)},{_fmt(base)} {_fmt(x - 4)},{_fmt(base + dy)} {_fmt(x + 4)},{_fmt(base + dy)}"
        fill = color if m["kind"] == "beta" else "white"
        out.append(f'<polygon {attrs} points="{tri}" fill="{fill}" stroke="{color}"/>')
        ty = base + 3 * dy + (4 if dy > 0 else 0)
        out.append(f'<text x="{_fmt(x)}" y="{_fmt(ty)}" text-anchor="middle" fill="{color}">{escape(m["label"])}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _nice_step(span: float) -> float:
    raw = span / 8.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for f in (1.0, 2.0, 5.0, 10.0):
        if raw <= f * mag:
            return f * mag
    return 10.0 * mag


def _tick(t: float) -> str:
    t = 0.0 if abs(t) < 1e-12 else t
    return f"{t:.10g}"
