"""``rigor`` command line: generate, analyze, flex, sweep and kempe.

Exit codes: 0 success / rigid, 1 negative verdict (flexible, hypotheses
fail, trace out of tolerance), 2 error.
"""

from __future__ import annotations

import argparse
import ast
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from . import io
from .flexsim import PROJ_TOL, BranchPointError, chain_flex_protocol, simulate_flex
from .framework import FrameworkError
from .generators import FAMILIES, get_family
from .rigidity import NULL_TOL, flex_space

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2


class UsageError(ValueError):
    pass


# -- argument helpers -----------------------------------------------------------------

def positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def pair(text: str):
    try:
        a, b = (x.strip() for x in text.split(","))
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None


def int_pair(text: str):
    a, b = pair(text)
    if a != int(a) or b != int(b):
        raise argparse.ArgumentTypeError("expected integers")
    return int(a), int(b)


def parse_signs(text: str):
    if not text or any(c not in "+-" for c in text):
        raise UsageError("--signs must be a string of '+' and '-'")
    return tuple(1 if c == "+" else -1 for c in text)


_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "log": np.log, "abs": np.abs}
_CONSTS = {"pi": math.pi, "e": math.e}


def coefficient_function(text: str):
    """Safe vectorised coefficient expression in ``n``, e.g. ``1/n^2``."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError:
        raise UsageError(f"cannot parse coefficient expression {text!r}") from None
    ops = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide, ast.Pow: np.power}

    def ev(node, n):
        if isinstance(node, ast.Expression):
            return ev(node.body, n)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "n":
                return n
            if node.id in _CONSTS:
                return _CONSTS[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in ops:
            return ops[type(node.op)](ev(node.left, n), ev(node.right, n))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, n)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0], n))
        raise UsageError(f"unsupported element in coefficient expression {text!r}")

    ev(tree, np.arange(1.0, 4.0))  # validate eagerly

    def f(n):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.broadcast_to(ev(tree, np.asarray(n, dtype=float)), np.shape(n)).astype(float)

    return f


def thread_count(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("RIGOR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"RIGOR_THREADS must be an integer, got {env!r}") from None
    return 1


def echo(args) -> dict:
    """Parameters for the reproducibility header (no paths to output, no timestamps)."""
    skip = {"func", "out", "format", "threads", "command", "kempe_command"}
    out = {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}
    if "input" in out:
        out["input"] = os.path.basename(out["input"])
    return out


# -- generate ------------------------------------------------------------------------

# family -> (rank option, default rank)
_RANK_OPTION = {
    "harmonic-chain": ("n", 4),
    "diminishing-rectangles": ("n", 5),
    "winerack": ("bays", 5),
    "cantor-tree": ("depth", 3),
    "strip-tower": ("n", 4),
    "periodic-square": ("n", 3),
    "periodic-kagome": ("n", 2),
}


def _shape(name: str):
    """Small fixed frameworks for quick checks; None if ``name`` is not one."""
    from .framework import build_framework
    from .generators import square_cell

    if name == "triangle":
        return build_framework([(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2)], [(0, 1), (1, 2), (0, 2)], family={"name": "triangle", "rank": 1})
    if name in ("square", "braced-square"):
        c = square_cell(diagonals=name == "braced-square")
        return build_framework(c.positions, c.edges, family={"name": name, "rank": 1})
    return None


SHAPES = ("triangle", "square", "braced-square")


def _family_name(args) -> str:
    name = args.family
    if name == "cobweb":
        name = "cobweb-" + (args.direction or "inward").replace("_", "-")
    if name not in FAMILIES:
        raise UsageError(f"unknown family {args.family!r}; known: cobweb, {', '.join(sorted(FAMILIES))}; shapes: {', '.join(SHAPES)}")
    return name


def cmd_generate(args) -> int:
    from . import generators as g

    f = _shape(args.family)
    if f is not None:
        io.emit(io.framework_svg(f) if args.format == "svg" else io.dumps(io.framework_to_dict(f)) + "\n", args.out)
        return EXIT_OK
    name = _family_name(args)
    opt, default = _RANK_OPTION.get(name, ("levels", 3))
    rank = args.rank or getattr(args, opt, None) or default
    if name == "harmonic-chain":
        signs = parse_signs(args.signs) if args.signs else None
        if signs is not None and len(signs) != rank:
            if args.n is None and args.rank is None:
                rank = len(signs)
            else:
                raise UsageError(f"--signs has {len(signs)} entries but n = {rank}")
        f = g.harmonic_chain(rank, signs)
    elif name == "strip-tower":
        f = g.strip_tower(rank, args.aspect)
    else:
        f = get_family(name)(rank)
    if args.format == "svg":
        io.emit(io.framework_svg(f), args.out)
    else:
        io.write_framework(f, args.out)
    return EXIT_OK


# -- analyze -------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    f = io.read_framework(args.input)
    rep = flex_space(f, args.tol)
    if args.format == "svg":
        io.emit(io.framework_svg(f), args.out)
    else:
        d = {"tool": f"rigor {__version__}", "input": os.path.basename(args.input)}
        d.update(rep.to_dict())
        d["infinitesimally_rigid"] = rep.infinitesimally_rigid
        io.emit(io.dumps(d) + "\n", args.out)
    return EXIT_OK if rep.proper_dim == 0 else EXIT_NEGATIVE


# -- flex ----------------------------------------------------------------------------

def cmd_flex(args) -> int:
    f = io.read_framework(args.input)
    pins = args.pins
    for v in pins:
        if not 0 <= v < f.n_vertices:
            raise UsageError(f"pin {v} out of range for {f.n_vertices} vertices")
    code = EXIT_OK
    try:
        traj = simulate_flex(f, pins, steps=args.steps, arc_step=args.arc_step, tol=args.tol, proj_tol=args.proj_tol)
    except BranchPointError as e:
        print(f"rigor flex: {e}", file=sys.stderr)
        traj, code = e.trajectory, EXIT_ERROR
    if traj.rigid:
        print("rigor flex: framework is infinitesimally rigid with these pins; no flex", file=sys.stderr)
        code = EXIT_NEGATIVE
    hdr = io.repro_header("flex", echo(args)) + [
        f"# stop_reason: {traj.stop_reason}",
        f"# max_constraint_residual: {io.fmt(traj.max_constraint_residual)}",
    ]
    if args.format == "svg":
        paths = [(traj.positions[:, v], "crimson") for v in range(f.n_vertices) if v not in pins]
        io.emit(io.framework_svg(f, traj.positions[-1], paths), args.out)
    elif args.format == "json":
        d = {
            "tool": f"rigor {__version__}",
            "params": echo(args),
            "stop_reason": traj.stop_reason,
            "rigid": traj.rigid,
            "proper": traj.proper,
            "max_constraint_residual": traj.max_constraint_residual,
            "times": traj.times,
            "positions": traj.positions,
        }
        io.emit(io.dumps(d) + "\n", args.out)
    else:
        io.emit(io.trajectory_csv(traj, hdr), args.out)
    return code


# -- sweep ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    fam = get_family(_family_name(args))
    # vertex pair is given 1-indexed on the command line
    if (args.i is None) != (args.j is None):
        raise UsageError("give both --i and --j or neither")
    i = j = None
    if args.i is not None:
        if args.i < 1 or args.j < 1:
            raise UsageError("--i and --j are 1-indexed")
        i, j = args.i - 1, args.j - 1
    res = chain_flex_protocol(
        fam, i, j, r_max=args.rmax, steps=args.steps, arc_step=args.arc_step,
        tol=args.tol, proj_tol=args.proj_tol, threads=thread_count(args),
    )
    if args.format == "json":
        d = {
            "tool": f"rigor {__version__}",
            "params": echo(args),
            "family": res.family,
            "pair": list(res.pair),
            "rows": [dict(rank=r.rank, delta=r.delta, M=r.M, M_all=r.M_all, residual=r.residual, stop_reason=r.stop_reason, error=r.error) for r in res.rows],
            "delta_slope": res.delta_slope,
            "M_slope": res.M_slope,
            "c": res.c,
            "M": res.M,
            "verdict": res.verdict,
        }
        io.emit(io.dumps(d) + "\n", args.out)
    else:
        hdr = io.repro_header("sweep", echo(args)) + [
            f"# pair (0-based): {res.pair[0]},{res.pair[1]}",
            f"# delta_slope: {io.fmt(res.delta_slope)}",
            f"# M_slope: {io.fmt(res.M_slope)}",
            f"# c: {io.fmt(res.c)}",
            f"# M: {io.fmt(res.M)}",
        ]
        io.emit(io.protocol_csv(res, hdr), args.out)
    print(res.verdict, file=sys.stderr)
    return EXIT_OK if res.satisfied else EXIT_NEGATIVE


# -- kempe ---------------------------------------------------------------------------

REFERENCE_TERMS = 10**4


def _form_json(form) -> dict:
    return {
        "constant": form.constant,
        "terms": [{"A": t.A, "r": t.r, "s": t.s, "t": t.t} for t in form.terms],
        "text": str(form),
    }


def _fourier_coeffs(args):
    cos_c = coefficient_function(args.fourier) if args.fourier else None
    sin_c = coefficient_function(args.fourier_sin) if args.fourier_sin else None
    if cos_c is None and sin_c is None:
        raise UsageError("give --fourier and/or --fourier-sin")
    return cos_c, sin_c


def _build_linkage(args):
    from .kempe import angle_expand, assemble_curve_linkage, fourier_linkage

    if getattr(args, "input", None):
        return io.linkage_from_dict(io.read_json(args.input))
    if args.fourier or args.fourier_sin:
        cos_c, sin_c = _fourier_coeffs(args)
        return fourier_linkage(cos_c, args.N, sin_c, a0=args.a0, theta_range=args.theta_range)
    if args.poly:
        form = angle_expand(args.poly)
        return assemble_curve_linkage(form, args.theta_range, args.phi_range, close=args.close)
    raise UsageError("give --poly, --fourier or --in")


def cmd_kempe_expand(args) -> int:
    from .kempe import angle_expand, grid_check, parse_trig

    poly = parse_trig(args.poly)
    form = angle_expand(poly)
    d = {"tool": f"rigor {__version__}", "poly": args.poly}
    d.update(_form_json(form))
    d["abs_sum"] = form.abs_sum
    d["grid_error"] = grid_check(poly, form)
    io.emit(io.dumps(d) + "\n", args.out)
    return EXIT_OK


def cmd_kempe_build(args) -> int:
    link = _build_linkage(args)
    if args.format == "svg":
        io.emit(io.framework_svg(link.framework), args.out)
    else:
        io.emit(io.dumps(io.linkage_to_dict(link)) + "\n", args.out)
    print(f"{link.framework.n_vertices} vertices, {len(link.framework.edges)} bars, tolerance {link.tolerance:.3e}", file=sys.stderr)
    return EXIT_OK


def _target(link, args):
    """Callable theta -> target value for the traced graph, or None."""
    from .kempe import partial_sum

    if link.report.get("N") and (args.fourier or args.fourier_sin):
        cos_c, sin_c = _fourier_coeffs(args)
        return partial_sum(cos_c, link.report["N"], sin_c, args.a0), (cos_c, sin_c)
    if link.form is not None:
        phi = None
        if "phi" in link.inputs:
            phi = args.phi if args.phi is not None else link.phi_range[1]
        if link.closed_at is not None:
            return None, None
        return (lambda t: np.array([link.form(x, phi if phi is not None else 0.0) for x in np.atleast_1d(t)])), None
    return None, None


def cmd_kempe_trace(args) -> int:
    from .kempe import TraceError, partial_sum, trace

    link = _build_linkage(args)
    try:
        tr = trace(link, args.samples, args.phi)
    except TraceError as e:
        print(f"rigor kempe trace: {e}", file=sys.stderr)
        return EXIT_NEGATIVE
    target, coeffs = _target(link, args)
    hdr = io.repro_header("kempe trace", echo(args))
    hdr.append(f"# linkage_tolerance: {io.fmt(link.tolerance)}")
    hdr.append(f"# max_residual: {io.fmt(tr.max_residual)}")
    code = EXIT_OK
    lines = []
    if target is not None:
        err = float(np.max(np.abs(tr.values - target(tr.theta))))
        hdr.append(f"# max_error_vs_truncation: {io.fmt(err)}")
        lines.append(f"max |trace - target| = {err:.3e} (tolerance {link.tolerance:.3e})")
        if err > link.tolerance:
            code = EXIT_NEGATIVE
    if coeffs is not None:
        # full series: reference sum plus its own tail bound as slack
        from .kempe import tail_bound

        T = link.report["tail_bound"]
        ref = partial_sum(coeffs[0], REFERENCE_TERMS, coeffs[1], args.a0)(tr.theta)
        slack = tail_bound(coeffs[0], REFERENCE_TERMS, coeffs[1])
        full = float(np.max(np.abs(tr.values - ref)))
        bound = T + link.tolerance + slack
        hdr += [f"# tail_bound: {io.fmt(T)}", f"# max_error_vs_series: {io.fmt(full)}", f"# error_bound: {io.fmt(bound)}"]
        lines.append(f"max |trace - series| = {full:.3e} <= tail bound {T:.3e} + tolerance: {full <= bound}")
        if full > bound:
            code = EXIT_NEGATIVE
    if args.format == "svg":
        paths = [(tr.graph, "steelblue")]
        if target is not None:
            paths.append((np.column_stack([tr.theta, target(tr.theta)]), "crimson"))
        io.emit(io.svg_text(None, (), paths), args.out)
    elif args.format == "json":
        d = {"tool": f"rigor {__version__}", "params": echo(args), "theta": tr.theta, "values": tr.values, "tracer": tr.tracer, "g": tr.g, "residual": tr.residual}
        io.emit(io.dumps(d) + "\n", args.out)
    else:
        io.emit(io.trace_csv(tr, hdr), args.out)
    for ln in lines:
        print(ln, file=sys.stderr)
    return code


# -- parser --------------------------------------------------------------------------

def _common(p, formats=("json",), default=None):
    p.add_argument("--tol", type=positive_float, default=NULL_TOL, help="relative null-space tolerance")
    p.add_argument("--proj-tol", type=positive_float, default=PROJ_TOL, help="projection tolerance")
    p.add_argument("--format", choices=formats, default=default or formats[0])
    p.add_argument("-o", "--out", help="output path (default stdout)")


def _kempe_source(p):
    p.add_argument("--poly", help="trigonometric polynomial in theta, phi")
    p.add_argument("--fourier", help="cosine coefficients a_n as an expression in n, e.g. '1/n^2'")
    p.add_argument("--fourier-sin", help="sine coefficients b_n as an expression in n")
    p.add_argument("--N", type=positive_int, default=10, help="number of Fourier terms")
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--theta-range", type=pair, default=(0.2, 1.2))
    p.add_argument("--phi-range", type=pair, default=(0.2, 1.2))
    p.add_argument("--close", action="store_true", help="constrain the tracer to the level set through the reference")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rigor", description="Rigidity of infinite frameworks and Kempe linkages.")
    ap.add_argument("--version", action="version", version=f"rigor {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a truncation of a named family")
    g.add_argument("family")
    g.add_argument("--rank", type=positive_int)
    g.add_argument("--bays", type=positive_int)
    g.add_argument("--n", type=positive_int)
    g.add_argument("--levels", type=positive_int)
    g.add_argument("--depth", type=positive_int)
    g.add_argument("--signs")
    g.add_argument("--direction", choices=("inward", "outward", "two_way", "two-way"))
    g.add_argument("--aspect", type=positive_float, default=1.0)
    g.add_argument("--format", choices=("json", "svg"), default="json")
    g.add_argument("-o", "--out")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", help="infinitesimal flex space; exit 0 rigid, 1 flexible")
    a.add_argument("--in", dest="input", required=True)
    _common(a, ("json", "svg"))
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("flex", help="simulate a continuous flex")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--steps", type=positive_int, default=100)
    f.add_argument("--arc-step", type=positive_float, default=0.01)
    f.add_argument("--pins", type=int_pair, default=(0, 1))
    _common(f, ("csv", "json", "svg"))
    f.set_defaults(func=cmd_flex)

    s = sub.add_parser("sweep", help="chain flex protocol over truncations")
    s.add_argument("--family", required=True)
    s.add_argument("--direction", choices=("inward", "outward", "two_way", "two-way"))
    s.add_argument("--i", type=int, help="first vertex (1-indexed)")
    s.add_argument("--j", type=int, help="second vertex (1-indexed)")
    s.add_argument("--rmax", type=positive_int, default=8)
    s.add_argument("--steps", type=positive_int, default=2000)
    s.add_argument("--arc-step", type=positive_float, default=0.01)
    s.add_argument("--threads", type=positive_int, help="parallel ranks (default $RIGOR_THREADS or 1)")
    _common(s, ("csv", "json"))
    s.set_defaults(func=cmd_sweep)

    k = sub.add_parser("kempe", help="multiple-angle expansion and linkage construction")
    ks = k.add_subparsers(dest="kempe_command", required=True)
    ke = ks.add_parser("expand")
    ke.add_argument("poly")
    ke.add_argument("-o", "--out")
    ke.set_defaults(func=cmd_kempe_expand)
    kb = ks.add_parser("build")
    _kempe_source(kb)
    kb.add_argument("--format", choices=("json", "svg"), default="json")
    kb.add_argument("-o", "--out")
    kb.set_defaults(func=cmd_kempe_build)
    kt = ks.add_parser("trace")
    _kempe_source(kt)
    kt.add_argument("--in", dest="input", help="linkage JSON from 'kempe build'")
    kt.add_argument("--samples", type=positive_int, default=200)
    kt.add_argument("--phi", type=float, help="fixed phi for two-variable linkages")
    kt.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    kt.add_argument("-o", "--out")
    kt.set_defaults(func=cmd_kempe_trace)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    if getattr(args, "direction", None) == "two-way":
        args.direction = "two_way"
    try:
        return args.func(args)
    except (UsageError, FrameworkError, KeyError, ValueError, OSError, RuntimeError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"rigor {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
