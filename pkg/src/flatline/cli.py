"""Command-line entry point.

Every subcommand prints one JSON report (or CSV with ``--format csv``
where a table exists) holding the tool version, the resolved
configuration and the results. Exit codes: 0 success, 2 a hypothesis
failure (or an inconclusive verdict under ``--strict``), 1 any other error.
"""

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import mpmath
import numpy as np

from . import __version__
from .errors import FlatlineError, HypothesisFailure

EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS = 0, 1, 2


# surfaces

def load_surface(spec):
    """Surface from a JSON file or a built-in name.

    Built-ins: ``torus`` (unit square, one marked point) and
    ``slit:LAMBDA`` (double of the unit torus along a slit of length
    LAMBDA, area one after ``:normalized`` is appended).
    """
    from .slit_torus import build_slit_torus
    from .surface import normalize_area, square_torus, validate_surface
    if spec == "torus":
        return square_torus()
    if spec.startswith("slit:"):
        parts = spec.split(":")
        X = build_slit_torus(parts[1]).surface
        return normalize_area(X) if "normalized" in parts[2:] else X
    with open(spec) as fh:
        return validate_surface(json.load(fh))


def direction_arg(s):
    """Slope for the geometric commands: ``a/b``, a decimal or a named constant."""
    from .slit_torus import parse_real
    if s is None or "/" in s or s.strip().lower() in ("vertical", "horizontal", "inf"):
        return s
    try:
        return float(s)
    except ValueError:
        return float(parse_real(s)[0])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, mpmath.mpf):
        return mpmath.nstr(x, 20)
    if x is None or isinstance(x, str):
        return x
    return str(x)


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def emit(args, result, table=None):
    """Write the report; ``table`` is (header, rows) for CSV output."""
    if getattr(args, "format", "json") == "csv" and table is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table[0])
        for row in table[1]:
            w.writerow(_jsonable(list(row)))
        text = buf.getvalue()
    else:
        doc = {"tool": "flatline", "version": __version__, "config": _config(args),
               "result": result}
        text = json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# subcommands

def cmd_validate(args):
    X = load_surface(args.surface)
    emit(args, {
        "valid": True,
        "polygons": len(X.polygons),
        "genus": X.genus,
        "area": X.area,
        "cone_angles_over_2pi": [round(c.angle / (2 * math.pi)) for c in X.singularities],
    })
    return EXIT_OK


def cmd_profile(args):
    from .connections import divergence_profile
    X = load_surface(args.surface)
    prof = divergence_profile(X, direction_arg(args.theta), (args.t0, args.t1), args.step, norm=args.norm)
    rows = [(t, l, d, h, v) for t, l, d, (h, v) in zip(prof.times, prof.l1, prof.d, prof.realizers)]
    emit(args, {"rows": rows, "breakpoints": prof.breakpoints},
         (["t", "l1", "d", "realizer_h", "realizer_v"], rows))
    return EXIT_OK


def cmd_delaunay(args):
    from . import delaunay as dl
    X = load_surface(args.surface)
    tri = dl.delaunay_triangulate(X)
    res = {
        "triangles": [{"corners": tri.corners(t), "classes": tri.cls[t], "neighbours": tri.nbr[t]}
                      for t in range(tri.n_triangles)],
        "flips": tri.flips,
        "circumdisk_violations": len(dl.circumdisk_violations(tri)),
    }
    if args.eps is not None and args.delta is not None:
        cl = dl.classify(tri, args.eps, args.delta)
        res["triangle_classes"] = cl.triangles
        res["edge_gap_ok"] = cl.hypothesis_ok
    emit(args, res)
    return EXIT_OK


def cmd_network(args):
    from .network import build_network
    X = load_surface(args.surface)
    try:
        rep = build_network(X, eps=args.eps, delta=args.delta, K=args.K, samples=args.samples,
                            seed=args.seed, strict=args.strict)
    except HypothesisFailure as e:
        rep = getattr(e, "report", None)
        emit(args, {"error": type(e).__name__, "message": str(e),
                    "report": rep.summary() if rep is not None else None})
        return EXIT_HYPOTHESIS
    out = rep.summary()
    out["uncovered_points"] = [(p.poly, p.x, p.y) for p in rep.uncovered[:20]]
    out["witnesses"] = [((p.poly, p.x, p.y), w) for p, w in rep.witnesses[:20]]
    out["edges"] = rep.edges
    emit(args, out)
    return EXIT_OK


def cmd_strips(args):
    from .connections import enumerate_on, triangulation_of
    from .strips import buffered_square_from_strip, decompose_strips
    from .surface import rotate_to_vertical
    X = load_surface(args.surface)
    if args.theta is not None:
        X = rotate_to_vertical(X, direction_arg(args.theta))
    tri = triangulation_of(X)
    L = max(tri.edge_length(t, i) for t in range(tri.n_triangles) for i in range(3))
    cands = [c for c in enumerate_on(tri, L) if abs(c.h) > 1e-12]
    if not 0 <= args.gamma < len(cands):
        raise FlatlineError(f"gamma index {args.gamma} out of range (0..{len(cands) - 1})")
    dec = decompose_strips(tri, cands[args.gamma])
    bs = buffered_square_from_strip(dec)
    res = dec.summary()
    res["zippers"] = [s.zippers for s in dec.strips]
    res["buffered_square"] = {"side": bs.square.width, "embedded": bs.square.embedded,
                              "buffer_area": bs.alpha, "overlap": bs.overlap}
    emit(args, res)
    return EXIT_OK


def cmd_pz(args):
    from .strips import pz_surface
    from .surface import normalize_area, rotate_to_vertical
    X = normalize_area(rotate_to_vertical(load_surface(args.surface), direction_arg(args.theta)))
    rep = pz_surface(X, args.eps, args.t0, args.n, samples=args.samples, seed=args.seed,
                     k=args.k, window=args.window)
    emit(args, rep.summary())
    return EXIT_OK


def cmd_slit_analyze(args):
    from . import slit_torus as sl
    if args.plant:
        b = [int(x) for x in args.plant.split(",")]
        w1 = tuple(int(x) for x in args.w1.split(",")) if args.w1 else (0, 0)
        plant = sl.plant_direction(args.lam, b, w1=w1, dps=args.dps or 200)
        an = sl.analyze_plant(plant, args.J)
        extra = {"planted_w": plant.w, "planted_b": plant.b, "reached": plant.reached,
                 "recovered": dict(zip(("w", "b"), sl.recovered(an)))}
    else:
        st = sl.build_slit_torus(args.lam, args.dps or sl.DEFAULT_DPS)
        an = sl.shortest_sequence(st, args.theta, J=args.J or 30,
                                  dps=args.dps or sl.DEFAULT_DPS)
        extra = {}
    deltas, bs = {}, {}
    for run in an.runs:
        for r in run:
            deltas[r["index"]] = r["delta"]
            bs[r["index"]] = r["b"]
    rows = []
    for j, e in enumerate(an.sequence):
        rows.append((j, float(e.t), e.kind, e.vector.label, e.vector.separating,
                     float(deltas[j]) if j in deltas else None, bs.get(j)))
    res = {"verdict": an.verdict, "pattern": an.pattern, "terminated": an.terminated,
           "precision_exhausted": an.precision_exhausted, "stats": an.stats,
           "sequence": [dict(zip(("j", "t", "kind", "mn", "separating", "delta", "b"), r))
                        for r in rows],
           "partial_sums": [float(s) for s in an.partial_sums], **extra}
    emit(args, res, (["j", "t", "kind", "m", "n", "separating", "delta", "b"],
                     [(r[0], r[1], r[2], r[3][0], r[3][1], r[4], r[5], r[6]) for r in rows]))
    if args.strict and an.verdict == "INCONCLUSIVE":
        return EXIT_HYPOTHESIS
    return EXIT_OK


def selftest_checks():
    """Small fast checks with known answers; returns (name, ok) pairs."""
    from .connections import l1
    from .network import embed_square
    from .slit_torus import shortest_sequence
    from .strips import time_sequence
    from .surface import SurfacePoint, square_torus
    T = square_torus()
    out = [
        ("torus area", abs(T.area - 1) < 1e-12),
        ("torus systole", abs(l1(T) - 1) < 1e-12),
        ("torus square 0.5 embedded", embed_square(T, SurfacePoint(0, 0.5, 0.5), 0.5).embedded),
        ("torus square 1.5 obstructed",
         embed_square(T, SurfacePoint(0, 0.5, 0.5), 1.5).obstruction == (1.0, 0.0)),
        ("time sequence monotone", bool(np.all(np.diff(time_sequence(1, 10, 50).times) > 0))),
        ("slope 2/3 periodic", shortest_sequence("1/2", "2/3", J=10).verdict == "PERIODIC"),
    ]
    return out


def cmd_selftest(args):
    checks = selftest_checks()
    emit(args, {"checks": checks, "passed": all(ok for _, ok in checks)})
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_ERROR


# parser

def build_parser():
    p = argparse.ArgumentParser(prog="flatline", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=False):
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = common(sub.add_parser("validate", help="check a surface description"))
    sp.add_argument("--surface", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = common(sub.add_parser("profile", help="systole and divergence along a geodesic"))
    sp.add_argument("--surface", required=True)
    sp.add_argument("--theta", required=True, help="slope a/b or float")
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--t1", type=float, default=10.0)
    sp.add_argument("--step", type=float, default=0.1)
    sp.add_argument("--norm", choices=("sup", "euclid"), default="sup")
    sp.set_defaults(func=cmd_profile)

    sp = common(sub.add_parser("delaunay", help="Delaunay triangulation export"))
    sp.add_argument("--surface", required=True)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--delta", type=float)
    sp.set_defaults(func=cmd_delaunay)

    sp = common(sub.add_parser("network", help="build and verify a K-network"), seed=True)
    sp.add_argument("--surface", required=True)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--delta", type=float, default=0.2)
    sp.add_argument("--K", type=float, default=1.0)
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_network)

    sp = common(sub.add_parser("strips", help="vertical strip decomposition"))
    sp.add_argument("--surface", required=True)
    sp.add_argument("--gamma", type=int, default=0, help="index among non-vertical connections")
    sp.add_argument("--theta", help="rotate this direction to vertical first")
    sp.set_defaults(func=cmd_strips)

    sp = common(sub.add_parser("pz", help="quasi-independence estimates"), seed=True)
    sp.add_argument("--surface", required=True)
    sp.add_argument("--theta", required=True)
    sp.add_argument("--eps", type=float, default=1.0)
    sp.add_argument("--t0", type=float, default=2.0)
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--samples", type=int, default=20000)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--window", type=int, default=50)
    sp.set_defaults(func=cmd_pz)

    sp = sub.add_parser("slit", help="slit-torus direction analysis")
    ssub = sp.add_subparsers(dest="slit_command", required=True)
    sa = common(ssub.add_parser("analyze", help="shortest-vector sequence and verdict"))
    sa.add_argument("--lambda", dest="lam", required=True)
    sa.add_argument("--theta", help="slope a/b, decimal, golden")
    sa.add_argument("--J", type=int, help="sequence length (30, or twice the plant)")
    sa.add_argument("--plant", help="comma-separated b_j values")
    sa.add_argument("--w1", help="seed slit m,n")
    sa.add_argument("--dps", type=int)
    sa.add_argument("--strict", action="store_true")
    sa.set_defaults(func=cmd_slit_analyze)

    sp = common(sub.add_parser("selftest", help="run the built-in quick checks"))
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "slit" and not args.plant and args.theta is None:
        parser.error("slit analyze needs --theta or --plant")
    try:
        return args.func(args)
    except HypothesisFailure as e:
        print(f"flatline: hypothesis failure: {e}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (FlatlineError, ValueError, OSError) as e:
        print(f"flatline: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
