"""Deterministic artifact writers: CSV tables, JSON reports, SVG plots.

All numeric formatting is fixed (shortest round-trip via %.17g) so reruns
with the same seed produce byte-identical CSV files.  Wall-clock content is
confined to one metadata field of run.json.
"""

from __future__ import annotations

import json
from pathlib import Path


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def beta_csv(path: Path, mesh, columns):
    """columns: mapping name -> per-edge array; always includes geometry."""
    header = ["edge", "arclength_mid", "length"] + list(columns)
    mids = mesh.edge_arclength + 0.5 * mesh.edge_lengths
    rows = []
    for e in range(mesh.n_edges):
        row = [e, float(mids[e]), float(mesh.edge_lengths[e])]
        row += [float(columns[name][e]) for name in columns]
        rows.append(row)
    write_csv(path, header, rows)


def fields_csv(path: Path, mesh, u=None, p=None):
    header = ["node", "x", "y", "u", "p"]
    rows = []
    for i in range(mesh.n_vertices):
        rows.append(
            [
                i,
                float(mesh.vertices[i, 0]),
                float(mesh.vertices[i, 1]),
                float(u[i]) if u is not None else "",
                float(p[i]) if p is not None else "",
            ]
        )
    write_csv(path, header, rows)


def history_csv(path: Path, results):
    header = ["start", "iteration", "value", "pg_norm", "step"]
    rows = []
    for res in results:
        for e in res.history:
            rows.append([res.start_index, e.iteration, e.value, e.pg_norm, e.step])
    write_csv(path, header, rows)


def boundary_svg(path: Path, mesh, beta_values, title="beta vs arclength"):
    """Step plot of an edgewise coefficient against boundary arclength."""
    width, height = 720.0, 320.0
    ml, mr, mt, mb = 60.0, 20.0, 30.0, 40.0
    pw, ph = width - ml - mr, height - mt - mb
    total = mesh.perimeter
    ymin, ymax = 0.0, max(1.0, float(max(beta_values)))

    def sx(s):
        return ml + pw * s / total

    def sy(v):
        return mt + ph * (1.0 - (v - ymin) / (ymax - ymin))

    pts = []
    for e in range(mesh.n_edges):
        s0 = mesh.edge_arclength[e]
        s1 = s0 + mesh.edge_lengths[e]
        v = float(beta_values[e])
        pts.append(f"{sx(s0):.2f},{sy(v):.2f}")
        pts.append(f"{sx(s1):.2f},{sy(v):.2f}")
    poly = " ".join(pts)

    ticks = []
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = sx(frac * total)
        ticks.append(
            f'<line x1="{x:.2f}" y1="{mt + ph:.2f}" x2="{x:.2f}" y2="{mt + ph + 5:.2f}" stroke="black"/>'
            f'<text x="{x:.2f}" y="{mt + ph + 18:.2f}" font-size="10" text-anchor="middle">{frac * total:.3g}</text>'
        )
    for v in (ymin, 0.5 * (ymin + ymax), ymax):
        y = sy(v)
        ticks.append(
            f'<line x1="{ml - 5:.2f}" y1="{y:.2f}" x2="{ml:.2f}" y2="{y:.2f}" stroke="black"/>'
            f'<text x="{ml - 8:.2f}" y="{y + 3:.2f}" font-size="10" text-anchor="end">{v:.3g}</text>'
        )

    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">\n'
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n'
        f'<text x="{ml}" y="{mt - 10}" font-size="12">{title}</text>\n'
        + "\n".join(ticks)
        + f'\n<polyline points="{poly}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>\n'
        "</svg>\n"
    )
    path.write_text(svg)
