"""Batch command line front end.

Commands: enumerate, complex, euler, qpoly, dim, facelattice, export-dot.
All reports are exact (integers and fraction strings, never floats) and all
file outputs are byte-identical for identical configurations.

Exit codes: 0 success, 2 invalid parameters, 3 I/O or parse failure,
4 internal invariant violation (diagnostic dump on stderr).

The environment variable MCK_SEEN_CACHE may point to a JSON file used as a
persistent candidate-fingerprint -> canonical-form memo for `enumerate`;
outputs do not depend on the cache.
"""

import argparse
import json
import os
import sys
from fractions import Fraction

from . import complex_builder as cb
from . import morse_graph as mg
from . import permutohedron as ph
from . import perturbation as pt
from . import twist_algebra as ta

EXIT_PARAMS = 2
EXIT_IO = 3
EXIT_INVARIANT = 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _parse_triple(text, what):
    try:
        parts = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise CliError(EXIT_PARAMS, "%s must be 'a,b,c' integers, got %r"
                       % (what, text))
    if len(parts) != 3:
        raise CliError(EXIT_PARAMS, "%s must have three entries" % what)
    return parts


def _marking(args, p, q, r):
    if args.marked == "all":
        marked = (p, q, r)
    else:
        marked = _parse_triple(args.marked, "--marked")
    if args.fixed == "none":
        fixed = (0, 0, 0)
    else:
        fixed = _parse_triple(args.fixed, "--fixed")
    return cb.MarkingSpec(marked=marked, fixed=fixed)


def _frac_str(x):
    f = Fraction(x)
    return str(f.numerator) if f.denominator == 1 else "%d/%d" % (
        f.numerator, f.denominator)


def _read(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(EXIT_IO, "cannot read %s: %s" % (path, exc))


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, "cannot write %s: %s" % (path, exc))


def _load_cache():
    path = os.environ.get("MCK_SEEN_CACHE")
    if not path:
        return None, None
    cache = {}
    if os.path.exists(path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                cache = json.load(fh)
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_IO, "bad cache file %s: %s" % (path, exc))
    return cache, path


def _save_cache(cache, path):
    if path is None:
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(cache, fh, separators=(",", ":"), sort_keys=True)
    except OSError as exc:
        raise CliError(EXIT_IO, "cannot write cache %s: %s" % (path, exc))


def _load_complex_or_catalog(path):
    """Complex from either a complex dump or a catalog of seeds."""
    text = _read(path)
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise CliError(EXIT_IO, "invalid JSON in %s: %s" % (path, exc))
    try:
        if "incidence" in doc:
            return cb.complex_from_json(text)
        classes, p, q, r, marking = cb.catalog_from_json(text)
        seeds = [g for g in classes if len(g.levels) == 1]
        if len(seeds) != len(classes):
            raise CliError(EXIT_PARAMS,
                           "catalog contains non-seed classes; provide a "
                           "complex dump instead")
        return cb.build_complex(seeds, marking)
    except mg.LMGJSONError as exc:
        raise CliError(EXIT_IO, "corrupted input %s: %s" % (path, exc))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_enumerate(args):
    marking = _marking(args, args.p, args.q, args.r)
    cache, cache_path = _load_cache()
    classes = cb.enumerate_top_classes(args.p, args.q, args.r, marking,
                                       jobs=args.jobs, cache=cache)
    _save_cache(cache, cache_path)
    text = cb.catalog_to_json(classes, args.p, args.q, args.r, marking)
    if args.out:
        _write(args.out, text)
    else:
        print(text)
    print("classes: %d" % len(classes))
    hist = {}
    for g in classes:
        hist[len(g.levels)] = hist.get(len(g.levels), 0) + 1
    for s in sorted(hist):
        print("s=%d: %d" % (s, hist[s]))
    return 0


def cmd_complex(args):
    text = _read(args.input)
    try:
        classes, p, q, r, marking = cb.catalog_from_json(text)
    except mg.LMGJSONError as exc:
        raise CliError(EXIT_IO, "corrupted catalog %s: %s" % (args.input, exc))
    seeds = [g for g in classes if len(g.levels) == 1]
    if len(seeds) != len(classes):
        raise CliError(EXIT_PARAMS, "catalog must contain one-level seeds only")
    K = cb.build_complex(seeds, marking)
    out_text = cb.complex_to_json(K)
    if args.out:
        _write(args.out, out_text)
    else:
        print(out_text)
    print("classes: %d" % len(K.classes))
    print("incidence entries: %d" % len(K.incidence))
    return 0


def cmd_euler(args):
    K = _load_complex_or_catalog(args.input)
    chi = cb.euler_characteristic(K)
    if chi.skipped:
        print("formula: %d, independent: skipped (%s)" % (chi.formula, chi.note))
        return 0
    print("formula: %d, independent: %s, %s"
          % (chi.formula, _frac_str(chi.independent),
             "AGREE" if chi.agree else "DISAGREE"))
    if not chi.agree:
        print(chi.note)
    return 0


def cmd_qpoly(args):
    K = _load_complex_or_catalog(args.input)
    betti = None
    if args.betti is not None:
        try:
            betti = [int(x) for x in args.betti.split(",")]
        except ValueError:
            raise CliError(EXIT_PARAMS, "--betti must be comma-separated integers")
        if any(b < 0 for b in betti):
            raise CliError(EXIT_PARAMS, "--betti entries must be nonnegative")
    report = cb.morse_smale_report(K, betti)
    print("Q: %s" % " ".join(str(c) for c in report.q_coeffs))
    print("alternating sums: %s" % " ".join(str(c) for c in report.q_alternating))
    b0 = cb.betti0(K)
    print("beta_0 (incidence graph): %d" % b0)
    print("beta_0 <= q_0: %s" % ("ok" if b0 <= report.q_coeffs[0] else "VIOLATED"))
    if report.betti:
        print("betti: %s" % " ".join(str(b) for b in report.betti))
        print("betti <= q: %s" % ("ok" if report.betti_le_q else "VIOLATED"))
        print("alternating inequalities: %s"
              % ("ok" if report.alternating_ok else "VIOLATED"))
        print("zero slots j >= %d: %s"
              % (report.dim_bound, "ok" if report.zero_slots_ok else "VIOLATED"))
    print("note: %s" % report.note)
    return 0


def cmd_dim(args):
    K = _load_complex_or_catalog(args.input)
    print("%d" % cb.complex_dimension(K))
    return 0


def cmd_facelattice(args):
    try:
        parts = ph.enumerate_partitions(args.q)
        top = ph.OrderedPartition.of([set(range(1, args.q + 1))])
        nverts = len(ph.face_vertices(top))
    except ph.OrderBoundError as exc:
        raise CliError(EXIT_PARAMS, str(exc))
    print("vertices: %d, faces: %d" % (nverts, len(parts)))
    if args.dot:
        _write(args.dot, ph.face_poset_dot(args.q))
    return 0


def cmd_export_dot(args):
    if args.what == "faces":
        if args.q is None:
            raise CliError(EXIT_PARAMS, "--q is required for --what faces")
        try:
            text = ph.face_poset_dot(args.q)
        except ph.OrderBoundError as exc:
            raise CliError(EXIT_PARAMS, str(exc))
    elif args.what == "classes":
        if args.input is None:
            raise CliError(EXIT_PARAMS, "--input is required for --what classes")
        K = _load_complex_or_catalog(args.input)
        text = cb.class_poset_dot(K)
    elif args.what == "graph":
        if args.input is None:
            raise CliError(EXIT_PARAMS, "--input is required for --what graph")
        try:
            classes, _, _, _, _ = cb.catalog_from_json(_read(args.input))
        except mg.LMGJSONError as exc:
            raise CliError(EXIT_IO, "corrupted catalog: %s" % exc)
        if not (0 <= args.index < len(classes)):
            raise CliError(EXIT_PARAMS, "--index out of range (%d classes)"
                           % len(classes))
        text = mg.to_dot(classes[args.index])
    else:
        raise CliError(EXIT_PARAMS, "unknown --what %r" % args.what)
    if args.out:
        _write(args.out, text)
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="mck",
        description="Leveled Morse graphs on the sphere: catalogs, handle "
                    "complexes, and exact invariant reports.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_marking(p):
        p.add_argument("--marked", default="all",
                       help="'all' or 'p_hat,q_hat,r_hat' (default all)")
        p.add_argument("--fixed", default="none",
                       help="'none' or 'p_star,q_star,r_star' (default none)")

    pe = sub.add_parser("enumerate", help="enumerate one-level classes")
    pe.add_argument("--p", type=int, required=True)
    pe.add_argument("--q", type=int, required=True)
    pe.add_argument("--r", type=int, required=True)
    add_marking(pe)
    pe.add_argument("--out", help="catalog JSON path (stdout when omitted)")
    pe.add_argument("--jobs", type=int, default=1, help="worker cap")
    pe.set_defaults(func=cmd_enumerate)

    pc = sub.add_parser("complex", help="downward closure of a seed catalog")
    pc.add_argument("--input", required=True, help="catalog JSON")
    pc.add_argument("--out", help="complex JSON path (stdout when omitted)")
    pc.set_defaults(func=cmd_complex)

    pu = sub.add_parser("euler", help="Euler characteristic, both ways")
    pu.add_argument("--input", required=True, help="catalog or complex JSON")
    pu.set_defaults(func=cmd_euler)

    pq = sub.add_parser("qpoly", help="handle-count polynomial and "
                                      "Morse-Smale table")
    pq.add_argument("--input", required=True, help="catalog or complex JSON")
    pq.add_argument("--betti", help="comma-separated Betti numbers to check")
    pq.set_defaults(func=cmd_qpoly)

    pd = sub.add_parser("dim", help="dimension of the complex")
    pd.add_argument("--input", required=True, help="catalog or complex JSON")
    pd.set_defaults(func=cmd_dim)

    pf = sub.add_parser("facelattice", help="permutohedron census")
    pf.add_argument("--q", type=int, required=True)
    pf.add_argument("--dot", help="also write the face poset as DOT")
    pf.set_defaults(func=cmd_facelattice)

    px = sub.add_parser("export-dot", help="DOT exports")
    px.add_argument("--what", required=True, choices=["faces", "classes", "graph"])
    px.add_argument("--q", type=int)
    px.add_argument("--input")
    px.add_argument("--index", type=int, default=0,
                    help="class index for --what graph")
    px.add_argument("--out")
    px.set_defaults(func=cmd_export_dot)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.code
    except (cb.ParameterError, cb.ScopeError, ph.OrderBoundError,
            ph.PartitionError, pt.PerturbationError,
            ta.TwistAlgebraError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_PARAMS
    except mg.LMGJSONError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except mg.LMGError as exc:
        print("error: invalid input graph: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (pt.InvariantViolation, ta.AlgebraInvariantViolation) as exc:
        print("invariant violation: %s" % exc, file=sys.stderr)
        import traceback
        traceback.print_exc()
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
