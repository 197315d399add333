"""Command-line front end: ``srcurv {classify,ricci,bonnet-myers,lq,validate}``.

Every invocation writes one report document (JSON by default, CSV of the
per-covector records on request).  Floats carry 17 significant digits and
nothing time-dependent is written, so equal invocations give equal bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from collections import Counter

import numpy as np

from . import __version__
from .model import CovectorPoint, SubRiemannianModel

SCHEMA = "srcurv-report/1"
_FLOAT = "@@f:"


def _plain(obj):
    """Numpy-free structure with floats tagged for 17-digit output."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            return None
        t = format(v, ".17g")
        return _FLOAT + (t if any(ch in t for ch in ".en") else t + ".0")
    if isinstance(obj, complex):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    return obj


def dumps(doc) -> str:
    text = json.dumps(_plain(doc), indent=2, sort_keys=False)
    return re.sub(r'"' + re.escape(_FLOAT) + r'([^"]*)"', r"\1", text)


def _flatten(rec, prefix=""):
    out = {}
    for k, v in rec.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple, np.ndarray)):
            out[key] = json.dumps(_plain(v)).replace(_FLOAT, "").replace('"', "")
        elif isinstance(v, (float, np.floating)):
            out[key] = format(float(v), ".17g")
        else:
            out[key] = v
    return out


def to_csv(doc) -> str:
    rows = [_flatten(r) for r in doc.get("records", [])]
    if not rows:
        rows = [_flatten(doc.get("aggregate", {}))]
    cols = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# inputs


def load_model(spec: str):
    """``(model, zoo entry or None)`` from a zoo name or a JSON model file."""
    from . import zoo

    reg = zoo.registry()
    if spec in reg:
        e = reg[spec]
        return e.model, e
    if spec.endswith(".json"):
        return SubRiemannianModel.from_json(spec), None
    raise KeyError(f"unknown model {spec!r}: not a zoo name ({', '.join(sorted(reg))}) or a .json file")


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _covectors(args, model) -> list:
    from .lq import unit_covectors

    if args.x is not None or args.H is not None:
        if args.x is None or args.H is None:
            raise ValueError("--x and --H must be given together")
        return [CovectorPoint(np.array(_floats(args.x)), np.array(_floats(args.H)))]
    return unit_covectors(model, args.samples, args.seed, args.h_max)


def _base(args, command, model=None, conn=None) -> dict:
    doc = {"schema": SCHEMA, "tool_version": __version__, "command": command}
    if model is not None:
        doc["model"] = {"name": model.name, "dim": model.n, "horizontal_rank": model.d1}
    if conn is not None:
        doc["connection"] = conn.name
    doc["tolerances"] = {"rank_tol": args.tol}
    if hasattr(args, "samples"):
        doc["sampling"] = {"samples": args.samples, "seed": args.seed, "h_max": args.h_max,
                           "unit": "|sharp p| = 1, base points uniform in the middle half of the domain"}
    return doc


def _conn(args, model):
    from .connections import connection_by_name

    return connection_by_name(model, args.connection)


def _record(p):
    return {"x": p.x, "H": p.H}


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args) -> dict:
    from .twist import classify

    model, entry = load_model(args.model)
    conn = _conn(args, model)
    maximal = entry.maximal_diagram if entry is not None else None
    doc = _base(args, "classify", model, conn)
    recs, census = [], Counter()
    for p in _covectors(args, model):
        c = classify(model, conn, p, window=args.window, maximal_diagram=maximal, tol=args.tol)
        rec = _record(p)
        rec.update(c.to_dict())
        recs.append(rec)
        census[c.diagram.label()] += 1
    doc["records"] = recs
    n = max(len(recs), 1)
    doc["aggregate"] = {
        "census": dict(sorted(census.items())),
        "classes": len(census),
        "ample_fraction": sum(r["ample"] for r in recs) / n,
        "uncertain_fraction": sum(r["uncertain"] for r in recs) / n,
        "sigma_fraction": (sum(bool(r["in_sigma"]) for r in recs) / n) if maximal is not None else None,
        "maximal_diagram": list(maximal) if maximal is not None else None,
    }
    return doc


def cmd_ricci(args) -> dict:
    from .canonical import DegenerateCovectorError, UnsupportedDiagramError, curvature_report

    model, _ = load_model(args.model)
    conn = _conn(args, model)
    doc = _base(args, "ricci", model, conn)
    recs = []
    inf = {}
    for p in _covectors(args, model):
        rec = _record(p)
        try:
            rep = curvature_report(conn, p)
        except (DegenerateCovectorError, UnsupportedDiagramError) as exc:
            rec["error"] = {"type": type(exc).__name__, "message": str(exc)}
            recs.append(rec)
            continue
        rec.update(rep.to_dict())
        rec.pop("x", None)
        rec.pop("H", None)
        rec = {"x": p.x, "H": p.H, **rec}
        for k, v in rep.ricci.items():
            inf[k] = min(inf.get(k, np.inf), v)
        recs.append(rec)
    doc["records"] = recs
    doc["aggregate"] = {"sampled_infimum": inf, "count": len(recs)}
    return doc


def cmd_bonnet_myers(args) -> dict:
    from .lq import diameter_bound

    model, _ = load_model(args.model)
    conn = _conn(args, model)
    doc = _base(args, "bonnet-myers", model, conn)
    rep = diameter_bound(model, conn, args.samples, args.seed, args.h_max, args.t_max)
    doc["records"] = []
    doc["aggregate"] = rep.to_dict()
    return doc


def cmd_lq(args) -> dict:
    from .lq import LQProblem, bm_polynomial_check, conjugate_time

    rows = [int(v) for v in args.rows.split(",")]
    q = _floats(args.q)
    prob = LQProblem.from_rows(rows, q)
    doc = {"schema": SCHEMA, "tool_version": __version__, "command": "lq",
           "tolerances": {"time_tol": args.time_tol, "grid": 512}}
    tc = conjugate_time(prob, args.t_max, args.time_tol)
    agg = {"rows": rows, "q": q, "t_max": args.t_max, "conjugate_time": tc,
           "found": tc is not None}
    if len(rows) == 1:
        agg["polynomial_check"] = bm_polynomial_check(q)
    doc["records"] = []
    doc["aggregate"] = agg
    return doc


def cmd_validate(args) -> dict:
    from .canonical import (DegenerateCovectorError, UnsupportedDiagramError, canonical_data, kernel_residuals,
                            validate_normalization)
    from .connections import check_compatibility, validate_identities

    model, _ = load_model(args.model)
    conn = _conn(args, model)
    doc = _base(args, "validate", model, conn)
    pts = _covectors(args, model)
    ident = validate_identities(conn, [p.x for p in pts], tol=1e-8)
    comp = [check_compatibility(conn, p.x) for p in pts]
    recs = []
    worst_norm = worst_kernel = 0.0
    for p in pts:
        rec = _record(p)
        try:
            d = canonical_data(conn, p)
            rec["diagram"] = d.diagram.label()
            if d.basis is not None and d.RS is not None:
                nr = validate_normalization(d)
                rec["normalization"] = nr.to_dict()
                worst_norm = max(worst_norm, nr.worst)
            kr = kernel_residuals(d)
            rec["kernel"] = kr
            worst_kernel = max([worst_kernel, *kr.values()])
            rec["Q_antisymmetry"] = float(np.max(np.abs(d.Q + d.Q.T)))
            rec["S_symmetry"] = float(np.max(np.abs(d.S_E - d.S_E.T)))
        except (DegenerateCovectorError, UnsupportedDiagramError) as exc:
            rec["error"] = {"type": type(exc).__name__, "message": str(exc)}
        recs.append(rec)
    ok = ident.ok and all(c["ok"] for c in comp) and worst_norm <= 1e-5 and worst_kernel <= 1e-5
    comp_worst = max((max(v for k, v in c.items() if k != "ok") for c in comp), default=0.0)
    doc["records"] = recs
    doc["aggregate"] = {"identities": ident.to_dict(), "compatibility_worst": comp_worst,
                        "normalization_worst": worst_norm, "kernel_worst": worst_kernel, "ok": ok}
    doc["_exit"] = 0 if ok else 1
    return doc


COMMANDS = {"classify": cmd_classify, "ricci": cmd_ricci, "bonnet-myers": cmd_bonnet_myers,
            "lq": cmd_lq, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srcurv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"srcurv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--tol", type=float, default=1e-7, help="relative rank tolerance")
        if model:
            sp.add_argument("--model", required=True, help="zoo name or JSON model file")
            sp.add_argument("--connection", choices=("nice", "group"), default="nice")
            sp.add_argument("--samples", type=int, default=20)
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--h-max", type=float, default=3.0, help="vertical momentum range [-h, h]")
            sp.add_argument("--x", help="comma-separated base point (with --H: single covector)")
            sp.add_argument("--H", help="comma-separated frame momenta")
            sp.add_argument("--t-max", type=float, default=100.0)

    common(sub.add_parser("classify", help="Young-diagram census over a covector sample"))
    sub.choices["classify"].add_argument("--window", type=float, default=0.0,
                                         help="extremal time window for the equiregularity check")
    common(sub.add_parser("ricci", help="canonical curvature and Ricci invariants"))
    common(sub.add_parser("bonnet-myers", help="sampled diameter bounds"))
    common(sub.add_parser("validate", help="connection identities and normalization residuals"))
    lq = sub.add_parser("lq", help="conjugate time of an LQ comparison problem")
    common(lq, model=False)
    lq.add_argument("--rows", default="1", help="row lengths of the Young diagram, e.g. 2 or 1,1")
    lq.add_argument("--q", required=True, help="diagonal of q, one entry per cell, row by row")
    lq.add_argument("--t-max", type=float, default=100.0)
    lq.add_argument("--time-tol", type=float, default=1e-10)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = COMMANDS[args.command](args)
        code = doc.pop("_exit", 0)
    except Exception as exc:  # reported as a structured error document
        doc = {"schema": SCHEMA, "tool_version": __version__, "command": args.command,
               "error": {"type": type(exc).__name__, "message": str(exc)}}
        code = 2
    text = to_csv(doc) if args.format == "csv" and "error" not in doc else dumps(doc) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
