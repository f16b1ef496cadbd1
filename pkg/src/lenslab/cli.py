"""lenslab: geodesic scattering experiments from the command line.

Usage:
    lenslab scatter --spec flat-d2s1 --entry "1,0,0" --dir "-1,0,0"
    lenslab lens --spec flat-d2s1 --grid 10,10,10 --out table.csv
    lenslab compare --family bump --shifts -0.5,0,0.5 --angles 30 --out cmp.json
    lenslab compare --table-a a.csv --table-b b.csv --out cmp.json
    lenslab clairaut-family --shifts -0.5,0,0.5 --angles 24 --out scan.csv --plot
    lenslab volume --spec flat-d2s1 --samples 1000000 --out vol.json
    lenslab trapped --spec flat-d2s1 --budgets 100,1000,10000 --samples 200000
    lenslab busemann --spec flat-d2s1 --base 0,0,0 --dir 1,0,0 --p 0,1.3,0 --t 1000
    lenslab selftest [--fast] [--workers 2] [--out report.json]

Every run is reproducible from its flags and seed: outputs carry no
timestamps, and worker counts never change results.  Exit codes: 0 success,
1 error, 2 tolerance failure in selftest.  With --plot, commands that write
delimited reports also render a PNG figure next to them.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import report as figures
from .config import PRESETS, resolve_spec, spec_fingerprint
from .errors import LensLabError
from .geodesic import integrate_until_exit
from .integralgeom import (
    busemann_gradient_norm,
    busemann_value,
    flat_trapped_tail_exact,
    nontrapped_volume,
    santalo_volume,
    trapped_ladder,
)
from .manifold import (
    BumpProfile,
    FlatProduct,
    SurfaceOfRevolution,
    boundary_type,
    chart_coord_names,
)
from .revolution import family_invariance_scan
from .scattering import (
    GridSampling,
    MonteCarloSampling,
    compare,
    lens_table,
    read_lens_csv,
    record_to_json_dict,
    scatter_route,
    write_lens_csv,
)
from .selftest import report_dict, run_selftest


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _emit(payload: dict, out: str | None):
    blob = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(blob)
    else:
        sys.stdout.write(blob)


def _load_spec(args):
    name = args.config or args.spec
    if name is None:
        raise LensLabError("provide --spec PRESET|PATH or --config PATH")
    return resolve_spec(name)


def _entry_vector(spec, entry, direction):
    bt = boundary_type(spec)
    p = _floats(entry)
    c = _floats(direction)
    if isinstance(spec, SurfaceOfRevolution):
        if len(p) != 2 or len(c) != 2:
            raise LensLabError("revolution boundary takes entry 'end,alpha' "
                               "and dir 'v_t,v_alpha'")
        point = bt.point(int(p[0]), p[1])
    else:
        n = spec.n if isinstance(spec, FlatProduct) else spec.base.n
        if len(p) != n + 1 or len(c) != n + 1:
            raise LensLabError(f"product boundary takes {n + 1} entry coords "
                               f"(u..., theta) and {n + 1} direction comps")
        point = bt.point(p[:n], p[n])
    return bt.vector(point, c, normalize=True)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_scatter(args) -> int:
    spec = _load_spec(args)
    b = _entry_vector(spec, args.entry, args.dir)
    if args.trajectory:
        verdict, traj = integrate_until_exit(spec, b, budget=args.budget,
                                             record=True)
        traj.write_csv(args.trajectory, chart_coord_names(spec))
        from .scattering import record_from_verdict

        rec = record_from_verdict(b, verdict)
    else:
        scatter = scatter_route(spec, args.route)
        if args.route == "ode" and args.budget is not None:
            from .scattering import scattering_map

            scatter = lambda v: scattering_map(spec, v, budget=args.budget)
        rec = scatter(b)
    if args.format == "csv":
        _emit_record_csv(spec, rec, args.out)
        return 0
    payload = record_to_json_dict(rec)
    payload["spec_fingerprint"] = spec_fingerprint(spec)
    _emit(payload, args.out)
    return 0


def _emit_record_csv(spec, rec, out):
    from .scattering import LensTable, write_lens_csv

    bt = boundary_type(spec)
    table = LensTable(bt, {"kind": "single"}, [rec], spec_fingerprint(spec),
                      rec.travel_time)
    if out:
        write_lens_csv(table, out)
    else:
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "rec.csv")
            write_lens_csv(table, path)
            with open(path, "r", encoding="utf-8") as fh:
                sys.stdout.write(fh.read())


def cmd_lens(args) -> int:
    spec = _load_spec(args)
    if args.grid:
        sampling = GridSampling(_ints(args.grid))
    elif args.samples:
        sampling = MonteCarloSampling(args.samples, args.seed)
    else:
        raise LensLabError("provide --grid K,K,... or --samples N")
    table = lens_table(spec, sampling, budget=args.budget, route=args.route,
                       workers=args.workers)
    if args.out is None:
        raise LensLabError("lens writes CSV + sidecar; provide --out PATH")
    write_lens_csv(table, args.out)
    counts = {}
    for rec in table.records:
        counts[rec.status] = counts.get(rec.status, 0) + 1
    _emit({"records": len(table.records), "statuses": counts,
           "out": args.out}, None)
    return 0


def cmd_compare(args) -> int:
    if args.table_a and args.table_b:
        rep = compare(read_lens_csv(args.table_a), read_lens_csv(args.table_b),
                      keep_per_record=bool(args.per_record))
        payload = rep.to_json_dict()
        if args.per_record:
            rep.write_csv(args.per_record)
        _emit(payload, args.out)
        return 0
    if args.family != "bump":
        raise LensLabError("compare needs --table-a/--table-b or --family bump")

    shifts = _floats(args.shifts)
    n_angles = args.angles
    samp = GridSampling((1, args.alpha_nodes, n_angles))
    base_spec = SurfaceOfRevolution(BumpProfile(args.amplitude, args.epsilon, 0.0))
    base = lens_table(base_spec, samp, route=args.route, workers=args.workers)
    per_shift = {}
    devs_by_shift = {}
    for s in shifts:
        member = SurfaceOfRevolution(BumpProfile(args.amplitude, args.epsilon, s))
        table = lens_table(member, samp, route=args.route, workers=args.workers)
        rep = compare(base, table, keep_per_record=True)
        per_shift[f"{s:g}"] = rep.to_json_dict()
        devs_by_shift[s] = [max(r[3], r[4], r[5]) for r in rep.per_record]
    overall = max(block["max_deviation"] for block in per_shift.values())
    payload = {
        "family": "bump",
        "amplitude": args.amplitude,
        "epsilon": args.epsilon,
        "base_shift": 0.0,
        "route": args.route,
        "n_angles": n_angles,
        "per_shift": per_shift,
        "max_deviation": overall,
    }
    _emit(payload, args.out)
    if args.plot:
        if not args.out:
            raise LensLabError("--plot needs --out to place the figure")
        phi_nodes = [(i + 0.5) / n_angles * math.pi - math.pi / 2
                     for i in range(n_angles)]
        figures.render_family_compare(phi_nodes,
                                      _fold_angle_devs(devs_by_shift, n_angles),
                                      args.out + ".png")
    return 0


def _fold_angle_devs(devs_by_shift, n_angles):
    folded = {}
    for s, devs in devs_by_shift.items():
        per_angle = [0.0] * n_angles
        for i, d in enumerate(devs):
            k = i % n_angles
            if not math.isnan(d):
                per_angle[k] = max(per_angle[k], d)
        folded[s] = per_angle
    return folded


def cmd_clairaut_family(args) -> int:
    shifts = _floats(args.shifts)
    angles = [(i + 0.5) / args.angles * args.phi_max for i in range(args.angles)]
    scan = family_invariance_scan(args.amplitude, args.epsilon, shifts, angles)
    payload = scan.to_json_dict()
    if args.out:
        scan.write_csv(args.out)
        payload["out"] = args.out
        _emit(payload, args.out + ".summary.json")
        _emit({"max_deviation": scan.max_deviation, "out": args.out}, None)
        if args.plot:
            figures.render_family_scan(scan, args.out + ".png")
    else:
        if args.plot:
            raise LensLabError("--plot needs --out to place the figure")
        _emit(payload, None)
    return 0


def cmd_volume(args) -> int:
    spec = _load_spec(args)
    est = santalo_volume(spec, args.samples, budget=args.budget, seed=args.seed)
    payload = est.to_json_dict()
    payload["spec_fingerprint"] = spec_fingerprint(spec)
    try:
        payload["reference_nontrapped_volume"] = nontrapped_volume(spec)
    except LensLabError:
        pass
    if args.format == "csv":
        cols = ["volume", "stderr", "n_samples", "censored_fraction",
                "budget", "seed"]
        text = ",".join(cols) + "\n" + ",".join(
            repr(payload[c]) if isinstance(payload[c], float) else str(payload[c])
            for c in cols) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if args.plot:
            raise LensLabError("--plot pairs with --format json")
        return 0
    _emit(payload, args.out)
    if args.plot:
        if not args.out:
            raise LensLabError("--plot needs --out to place the figure")
        figures.render_volume([args.spec or "spec"], [est],
                              payload.get("reference_nontrapped_volume"),
                              args.out + ".png")
    return 0


def cmd_trapped(args) -> int:
    spec = _load_spec(args)
    budgets = _floats(args.budgets)
    ladder = trapped_ladder(spec, budgets, args.samples, seed=args.seed)
    oracle = None
    if isinstance(spec, FlatProduct) and spec.n == 2:
        oracle = [flat_trapped_tail_exact(spec, b) for b in sorted(budgets)]
    rows = [t.to_json_dict() for t in ladder]
    if oracle is not None:
        for row, ex in zip(rows, oracle):
            row["exact_tail"] = ex
    payload = {"ladder": rows, "spec_fingerprint": spec_fingerprint(spec)}
    if args.format == "csv":
        text = _ladder_csv_text(rows, oracle is not None)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if args.plot:
            if not args.out:
                raise LensLabError("--plot needs --out to place the figure")
            figures.render_trapped_ladder(ladder, oracle, args.out + ".png")
        return 0
    _emit(payload, args.out)
    csv_path = None
    if args.out:
        csv_path = args.out[:-5] + ".csv" if args.out.endswith(".json") \
            else args.out + ".csv"
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(_ladder_csv_text(rows, oracle is not None))
    if args.plot:
        if not args.out:
            raise LensLabError("--plot needs --out to place the figure")
        figures.render_trapped_ladder(ladder, oracle, args.out + ".png")
    return 0


def _ladder_csv_text(rows, with_oracle: bool) -> str:
    cols = "budget,fraction,stderr,n_samples,seed" + \
        (",exact_tail" if with_oracle else "")
    lines = [cols]
    for row in rows:
        vals = [row["budget"], row["fraction"], row["stderr"],
                row["n_samples"], row["seed"]]
        if with_oracle:
            vals.append(row["exact_tail"])
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in vals))
    return "\n".join(lines) + "\n"


def cmd_busemann(args) -> int:
    spec = _load_spec(args)
    base = np.asarray(_floats(args.base))
    direction = np.asarray(_floats(args.dir))
    p = np.asarray(_floats(args.p))
    value = busemann_value(spec, base, direction, p, args.t)
    payload = {"value": value, "t": args.t,
               "spec_fingerprint": spec_fingerprint(spec)}
    if args.grad_step:
        payload["gradient_norm"] = busemann_gradient_norm(
            spec, base, direction, p, args.t, h=args.grad_step)
    _emit(payload, args.out)
    return 0


def cmd_selftest(args) -> int:
    results, ok = run_selftest(fast=args.fast, workers=args.workers)
    if args.out:
        _emit(report_dict(results), args.out)
    print("selftest:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_spec_flags(p):
    p.add_argument("--spec", help="preset name (%s) or config path"
                   % ", ".join(sorted(PRESETS)))
    p.add_argument("--config", help="config file path (key = value grammar)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lenslab", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scatter", help="scatter one boundary vector")
    _add_spec_flags(p)
    p.add_argument("--entry", required=True, help="boundary point coords, comma separated")
    p.add_argument("--dir", required=True, help="direction comps, comma separated")
    p.add_argument("--route", default="ode", choices=["ode", "oracle", "quadrature"])
    p.add_argument("--budget", type=float)
    p.add_argument("--trajectory", help="CSV path for the traced geodesic nodes")
    p.add_argument("--format", default="json", choices=["csv", "json"])
    p.add_argument("--out")
    p.set_defaults(fn=cmd_scatter)

    p = sub.add_parser("lens", help="tabulate the scattering map over a sampling")
    _add_spec_flags(p)
    p.add_argument("--grid", help="grid dims over boundary x direction axes")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float)
    p.add_argument("--route", default="ode", choices=["ode", "oracle", "quadrature"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path (writes a .meta.json sidecar too)")
    p.set_defaults(fn=cmd_lens)

    p = sub.add_parser("compare", help="compare lens data under the boundary identification")
    p.add_argument("--table-a")
    p.add_argument("--table-b")
    p.add_argument("--per-record", help="CSV path for per-record deviations")
    p.add_argument("--family", choices=["bump"])
    p.add_argument("--shifts", default="-0.5,0.25,0.5")
    p.add_argument("--angles", type=int, default=30)
    p.add_argument("--alpha-nodes", type=int, default=1)
    p.add_argument("--amplitude", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--route", default="ode", choices=["ode", "quadrature"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("clairaut-family",
                       help="quadrature scan of the bump family across shifts")
    p.add_argument("--shifts", default="-0.5,0,0.25,0.5")
    p.add_argument("--angles", type=int, default=24)
    p.add_argument("--phi-max", type=float, default=1.25)
    p.add_argument("--amplitude", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--out", help="CSV path (JSON summary written next to it)")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_clairaut_family)

    p = sub.add_parser("volume", help="Santalo volume from lens data")
    _add_spec_flags(p)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--budget", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="json", choices=["csv", "json"])
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_volume)

    p = sub.add_parser("trapped", help="trapped fraction along a budget ladder")
    _add_spec_flags(p)
    p.add_argument("--budgets", default="100,1000,10000")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="json", choices=["csv", "json"])
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_trapped)

    p = sub.add_parser("busemann", help="Busemann approximant on the cover model")
    _add_spec_flags(p)
    p.add_argument("--base", required=True)
    p.add_argument("--dir", required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--t", type=float, default=1000.0)
    p.add_argument("--grad-step", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_busemann)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--fast", action="store_true", help="reduced sample sizes")
    p.add_argument("--workers", type=int, default=2)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(fn=cmd_selftest)

    return ap


#: flags whose values may start with a minus sign (coordinates, shifts);
#: folded into --flag=value form so argparse does not read them as options
_SIGNED_VALUE_FLAGS = {"--dir", "--entry", "--base", "--p", "--shifts",
                       "--budgets"}


def _fold_signed_values(argv):
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _SIGNED_VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(_fold_signed_values(list(argv)))
    try:
        return args.fn(args)
    except LensLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
