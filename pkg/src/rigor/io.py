"""File formats: Framework/Linkage JSON, CSV tables and SVG snapshots.

Floats are written with 17 significant digits and files are replaced
atomically, so identical runs give byte-identical outputs.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .framework import Framework, build_framework


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON text with floats as %.17g; keys keep insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        import sys

        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def repro_header(command: str, params: dict) -> List[str]:
    """Comment lines naming the tool version and echoing every parameter."""
    lines = [f"# rigor {__version__}", f"# command: {command}"]
    for k in sorted(params):
        lines.append(f"# {k}: {params[k]}")
    return lines


# -- frameworks ---------------------------------------------------------------------

def framework_to_dict(f: Framework) -> dict:
    d = {
        "dimension": 2,
        "vertices": [[float(x), float(y)] for x, y in f.positions],
        "edges": [[int(i), int(j)] for i, j in f.edges],
    }
    if f.labels is not None and any(f.labels):
        d["labels"] = list(f.labels)
    if f.family:
        d["family"] = dict(f.family)
    return d


def framework_from_dict(d: dict) -> Framework:
    if not isinstance(d, dict):
        raise ValueError("framework JSON must be an object")
    if d.get("dimension", 2) != 2:
        raise ValueError("only planar (dimension 2) frameworks are supported")
    try:
        verts = np.asarray(d["vertices"], dtype=float)
        edges = [tuple(int(v) for v in e) for e in d["edges"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"malformed framework JSON: {e}") from None
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise ValueError("vertices must be [x, y] pairs")
    if any(len(e) != 2 for e in edges):
        raise ValueError("edges must be [i, j] pairs")
    return build_framework(verts, edges, labels=d.get("labels"), family=d.get("family"))


def write_framework(f: Framework, path: Optional[str]) -> None:
    emit(dumps(framework_to_dict(f)) + "\n", path)


def read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON ({e})") from None


def read_framework(path: str) -> Framework:
    return framework_from_dict(read_json(path))


# -- linkages -------------------------------------------------------------------------

def linkage_to_dict(link) -> dict:
    d = framework_to_dict(link.framework)
    v1, v2, v3 = link.driver
    d["driver"] = {"v1": v1, "v2": v2, "v3": v3}
    d["tracer"] = link.tracer
    d["range"] = list(link.operating_range)
    d["gadgets"] = [{"kind": g.kind, "vertex_indices": list(g.vertex_indices), "tolerance": g.tolerance} for g in link.gadgets]
    d["ground"] = list(link.ground)
    d["inputs"] = {k: {"vertex": v, "radius": r} for k, (v, r) in link.inputs.items()}
    d["free_inputs"] = dict(link.free_inputs)
    d["reference"] = dict(link.reference)
    d["phi_range"] = list(link.phi_range) if link.phi_range else None
    d["constant"] = link.constant
    d["closed_at"] = link.closed_at
    d["chain"] = list(link.chain)
    if link.form is not None:
        d["form"] = {"constant": link.form.constant, "terms": [[t.A, t.r, t.s, t.t] for t in link.form.terms]}
    d["report"] = dict(link.report)
    return d


def linkage_from_dict(d: dict):
    from .kempe.expand import form_from_terms
    from .kempe.linkage import GadgetRecord, Linkage

    f = framework_from_dict(d)
    try:
        drv = d["driver"]
        form = None
        if d.get("form"):
            form = form_from_terms([tuple(t) for t in d["form"]["terms"]], d["form"]["constant"])
        return Linkage(
            f,
            (int(drv["v1"]), int(drv["v2"]), int(drv["v3"])),
            int(d["tracer"]),
            tuple(d["range"]),
            tuple(int(v) for v in d["ground"]),
            {k: (int(v["vertex"]), float(v["radius"])) for k, v in d["inputs"].items()},
            {k: float(v) for k, v in d["reference"].items()},
            tuple(GadgetRecord(g["kind"], tuple(g["vertex_indices"]), float(g["tolerance"])) for g in d.get("gadgets", [])),
            tuple(d["phi_range"]) if d.get("phi_range") else None,
            form,
            float(d.get("constant", 0.0)),
            d.get("closed_at"),
            tuple(d.get("chain", [])),
            dict(d.get("report", {})),
            {k: int(v) for k, v in d.get("free_inputs", {}).items()},
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"malformed linkage JSON: {e}") from None


# -- CSV ----------------------------------------------------------------------------

def csv_text(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    lines = list(comments)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def trajectory_csv(traj, comments=()) -> str:
    n = traj.positions.shape[1]
    header = ["t"] + [f"v{i}{c}" for i in range(n) for c in "xy"]
    rows = ([float(t)] + [float(x) for x in p.ravel()] for t, p in zip(traj.times, traj.positions))
    return csv_text(header, rows, comments)


def protocol_csv(result, comments=()) -> str:
    rows = [(r.rank, float(r.delta), float(r.M), float(r.residual), result.verdict) for r in result.rows]
    return csv_text(["rank", "delta", "M", "residual", "verdict"], rows, comments)


def trace_csv(tr, comments=()) -> str:
    rows = [(float(t), float(p[0]), float(p[1]), float(res), float(g)) for t, p, res, g in zip(tr.theta, tr.tracer, tr.residual, tr.g)]
    return csv_text(["t", "tracer_x", "tracer_y", "residual", "g"], rows, comments)


def read_csv_table(path: str) -> tuple:
    """(header, rows as float arrays) ignoring comment lines."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#") and ln.strip()]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        rows.append(ln.split(","))
    return header, rows


# -- SVG ----------------------------------------------------------------------------

def svg_text(positions: Optional[np.ndarray] = None, edges: Sequence = (), paths: Sequence = (), size: int = 600) -> str:
    """Deterministic SVG: bounding box plus 5% margin, y axis pointing up.

    ``paths`` is a sequence of (points, colour) polylines.
    """
    pts = []
    if positions is not None and len(positions):
        pts.append(np.asarray(positions, dtype=float))
    for p, _ in paths:
        pts.append(np.asarray(p, dtype=float))
    allp = np.vstack(pts) if pts else np.zeros((1, 2))
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    w, h = hi - lo
    scale = size / max(w, h)
    W, H = w * scale, h * scale

    def tx(p):
        return ((p[0] - lo[0]) * scale, (hi[1] - p[1]) * scale)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.3f}" height="{H:.3f}" viewBox="0 0 {W:.3f} {H:.3f}">']
    for i, j in edges:
        (x1, y1), (x2, y2) = tx(positions[i]), tx(positions[j])
        out.append(f'<line x1="{x1:.4f}" y1="{y1:.4f}" x2="{x2:.4f}" y2="{y2:.4f}" stroke="black" stroke-width="1"/>')
    if positions is not None:
        for p in positions:
            x, y = tx(p)
            out.append(f'<circle cx="{x:.4f}" cy="{y:.4f}" r="2.5" fill="steelblue"/>')
    for p, colour in paths:
        coords = " ".join("%.4f,%.4f" % tx(q) for q in np.asarray(p, dtype=float))
        out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def framework_svg(f: Framework, positions=None, paths=()) -> str:
    return svg_text(f.positions if positions is None else positions, f.edges, paths)
