"""Command-line front end.

Exit codes: 0 on success, 1 on validation errors (including bad flags),
2 on I/O errors.  Reports are JSON on stdout unless ``--out`` is given; set
``SOURCE_DATE_EPOCH`` to pin the provenance timestamp for byte-identical
reruns.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .griddist import (
    OpticsConfig,
    PlaneKind,
    _atomic_write_text,
    joint_to_counts,
    load_coincidence_csv,
    normalize_counts,
    save_coincidence_csv,
)
from .modular import ModularConfig, fold_joint
from .spectral import constant_c
from .states import (
    REFERENCE_SLITS,
    FarFieldMode,
    SlitSpec,
    add_background,
    ideal_far_field,
    ideal_near_field,
    momentum_axis,
    position_axis,
)
from .witnesses import (
    Criterion,
    coarse_grained_entropic,
    entropic_entanglement,
    entropic_steering,
    poisson_uncertainty,
    scan_ell,
    variance_entanglement,
    variance_steering,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunReport:
    command: str
    argv: list
    config: dict
    results: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "command": self.command,
            "argv": list(self.argv),
            "config": self.config,
            "results": [r.to_dict() for r in self.results],
        }
        out.update(self.extra)
        out["provenance"] = {"version": __version__, "timestamp": _timestamp()}
        return out


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        t = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return t.isoformat().replace("+00:00", "Z")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _slit_spec(args) -> SlitSpec:
    ref = REFERENCE_SLITS.get(args.slits, REFERENCE_SLITS[2])
    return SlitSpec(
        args.slits,
        args.width if args.width is not None else ref.a,
        args.sep if args.sep is not None else ref.d,
    )


def _optics(args) -> OpticsConfig:
    return OpticsConfig(args.magnification, args.focal_mm, args.wavelength_nm)


def _simulate_pair(args, spec: SlitSpec):
    near = ideal_near_field(spec, position_axis(spec, args.grid, args.bins))
    far = ideal_far_field(spec, momentum_axis(spec, args.grid, args.bins), FarFieldMode(args.mode))
    if args.background:
        near = add_background(near, args.background)
    return near, far


def _load_pair(args):
    near_counts = load_coincidence_csv(args.near)
    far_counts = load_coincidence_csv(args.far)
    if near_counts.kind is not PlaneKind.NEAR:
        raise ValueError(f"{args.near}: expected kind=near")
    if far_counts.kind is not PlaneKind.FAR:
        raise ValueError(f"{args.far}: expected kind=far")
    return near_counts, far_counts


def _inputs_echo(args) -> dict:
    return {
        "near": {"path": str(args.near), "sha256": _sha256(args.near)},
        "far": {"path": str(args.far), "sha256": _sha256(args.far)},
    }


def _emit(report: RunReport, args, table_rows=None, table_header=None) -> None:
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if table_header is None:
            table_header = ["criterion", "pairing", "lhs", "threshold", "violation", "sd"]
            table_rows = [
                [d["criterion"], d["pairing"] or "", repr(d["lhs"]), repr(d["threshold"]),
                 repr(d["violation"]), "" if d["sd"] is None else repr(d["sd"])]
                for d in (r.to_dict() for r in report.results)
            ]
        writer.writerow(table_header)
        writer.writerows(table_rows)
        text = buf.getvalue()
    else:
        text = json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"
    if args.out:
        _atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _bar_svg(path, results) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [r.criterion.value + (f"\n{r.pairing}" if r.pairing else "") for r in results]
    values = [r.violation for r in results]
    errs = [r.sd or 0.0 for r in results]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(labels, values, yerr=errs, color=["tab:red" if v < 0 else "tab:gray" for v in values])
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_ylabel("violation")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _line_svg(path, curve) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(curve.ratios, curve.violations, "o-", ms=3)
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel("ell / d")
    ax.set_ylabel("coarse-grained violation")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- subcommands ------------------------------------------------------------


def cmd_simulate(args) -> RunReport:
    spec = _slit_spec(args)
    near, far = _simulate_pair(args, spec)
    optics = _optics(args)
    rng = np.random.default_rng(args.seed) if args.poisson else None
    near_counts = joint_to_counts(near, PlaneKind.NEAR, optics, args.total, rng)
    far_counts = joint_to_counts(far, PlaneKind.FAR, optics, args.total, rng)
    save_coincidence_csv(near_counts, args.out_near)
    save_coincidence_csv(far_counts, args.out_far)
    config = {
        "slits": {"D": spec.D, "a_mm": spec.a, "d_mm": spec.d},
        "mode": args.mode,
        "background": args.background,
        "grid": args.grid,
        "bins": args.bins,
        "total": args.total,
        "poisson": args.poisson,
        "seed": args.seed,
        "optics": {"magnification": optics.magnification, "focal_mm": optics.focal_mm,
                   "wavelength_nm": optics.wavelength_nm},
    }
    files = {"near": str(args.out_near), "far": str(args.out_far),
             "near_cells": list(near_counts.counts.shape), "far_cells": list(far_counts.counts.shape)}
    return RunReport("simulate", args.argv, config, extra={"files": files})


_ENT = {"var-ent": [Criterion.VAR_ENT], "ent-ent": [Criterion.ENT_ENT],
        "coarse": [Criterion.COARSE_GRAINED],
        "all": [Criterion.VAR_ENT, Criterion.ENT_ENT, Criterion.COARSE_GRAINED]}
_STEER = {"var-steer": [Criterion.VAR_STEER], "ent-steer": [Criterion.ENT_STEER],
          "all": [Criterion.VAR_STEER, Criterion.ENT_STEER]}


def _run_criteria(args, criteria) -> RunReport:
    near_counts, far_counts = _load_pair(args)
    cfg = ModularConfig(args.ell, args.bins)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mn = fold_joint(normalize_counts(near_counts), cfg)
        mf = fold_joint(normalize_counts(far_counts), cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    sep = args.sep if args.sep is not None else args.ell
    results = []
    for crit in criteria:
        if crit is Criterion.VAR_ENT:
            res = variance_entanglement(mn, mf, args.ell, pairing=args.pairing)
        elif crit is Criterion.ENT_ENT:
            res = entropic_entanglement(mn, mf, args.ell, pairing=args.pairing)
        elif crit is Criterion.COARSE_GRAINED:
            res = coarse_grained_entropic(mn, mf, args.ell, sep, pairing=args.pairing)
        elif crit is Criterion.VAR_STEER:
            res = variance_steering(mn, mf, args.ell, direction=args.direction)
        else:
            res = entropic_steering(mn, mf, args.ell, direction=args.direction)
        if args.trials:
            _, sd = poisson_uncertainty(
                near_counts, far_counts, crit, args.trials, args.seed, ell=args.ell,
                bins=args.bins, pairing=args.pairing, d=sep, direction=args.direction,
            )
            res = res.with_sd(sd)
        results.append(res)
    config = {
        "ell": args.ell, "bins": args.bins, "sep": sep, "pairing": args.pairing,
        "direction": args.direction, "trials": args.trials, "seed": args.seed,
        "entropy_estimator": "histogram_plugin", "inputs": _inputs_echo(args),
    }
    report = RunReport(args.command, args.argv, config, results)
    if args.svg:
        _bar_svg(args.svg, results)
    return report


def cmd_witness(args) -> RunReport:
    return _run_criteria(args, _ENT[args.criterion])


def cmd_steer(args) -> RunReport:
    return _run_criteria(args, _STEER[args.criterion])


def cmd_resample(args) -> RunReport:
    near_counts, far_counts = _load_pair(args)
    sep = args.sep if args.sep is not None else args.ell
    crit = Criterion.parse(args.criterion)
    mean, sd = poisson_uncertainty(
        near_counts, far_counts, crit, args.trials, args.seed, ell=args.ell, bins=args.bins,
        pairing=args.pairing, d=sep, direction=args.direction,
    )
    config = {
        "ell": args.ell, "bins": args.bins, "sep": sep, "criterion": crit.value,
        "pairing": args.pairing, "direction": args.direction, "trials": args.trials,
        "seed": args.seed, "inputs": _inputs_echo(args),
    }
    return RunReport("resample", args.argv, config, extra={"resample": {"mean": mean, "sd": sd}})


def cmd_constant_c(args) -> RunReport:
    rep = constant_c(args.nmax)
    return RunReport("constant-c", args.argv, {"nmax": args.nmax}, extra={"constant": rep.to_dict()})


def cmd_scan_ell(args) -> RunReport:
    if args.near and args.far:
        near_counts, far_counts = _load_pair(args)
        near, far = normalize_counts(near_counts), normalize_counts(far_counts)
        if args.sep is None:
            raise ValueError("--sep is required when scanning measured data")
        sep = args.sep
        source = {"inputs": _inputs_echo(args)}
    elif args.near or args.far:
        raise ValueError("give both --near and --far, or neither to simulate")
    else:
        spec = _slit_spec(args)
        near, far = _simulate_pair(args, spec)
        sep = spec.d
        source = {"slits": {"D": spec.D, "a_mm": spec.a, "d_mm": spec.d}, "mode": args.mode,
                  "background": args.background, "grid": args.grid}
    if args.step <= 0 or args.stop < args.start:
        raise ValueError("need step > 0 and stop >= start")
    count = int(math.floor((args.stop - args.start) / args.step + 1e-9)) + 1
    ratios = np.round(args.start + args.step * np.arange(count), 12)
    curve = scan_ell(near, far, sep, ratios, args.bins, args.pairing)
    if args.curve_csv:
        lines = ["ratio,violation,bins"] + [
            f"{r!r},{v!r},{b}" for r, v, b in zip(curve.ratios.tolist(), curve.violations.tolist(), curve.bins.tolist())
        ]
        _atomic_write_text(args.curve_csv, "\n".join(lines) + "\n")
    if args.svg:
        _line_svg(args.svg, curve)
    config = {"sep": sep, "bins": args.bins, "pairing": args.pairing, "start": args.start,
              "stop": args.stop, "step": args.step, **source}
    return RunReport("scan-ell", args.argv, config, extra={"scan": curve.to_dict()})


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modwit", description="Modular-variable entanglement and steering witnesses")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    shared = _Parser(add_help=False)
    shared.add_argument("--bins", type=int, default=64, help="remainder bins per modular period")
    shared.add_argument("--grid", type=int, default=1024, help="target cells per axis for simulated grids")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--format", choices=("json", "csv"), default="json")
    shared.add_argument("--out", help="write the report here instead of stdout")

    geometry = _Parser(add_help=False)
    geometry.add_argument("--slits", type=int, default=2, help="slit count D")
    geometry.add_argument("--width", type=float, help="slit width a in mm")
    geometry.add_argument("--sep", type=float, help="slit separation d in mm")
    geometry.add_argument("--mode", choices=[m.value for m in FarFieldMode], default="comb")
    geometry.add_argument("--background", type=float, default=0.0,
                          help="uniform near-field background fraction")

    optics = _Parser(add_help=False)
    optics.add_argument("--magnification", type=float, default=3.6)
    optics.add_argument("--focal-mm", type=float, default=300.0)
    optics.add_argument("--wavelength-nm", type=float, default=810.0)

    inputs = _Parser(add_help=False)
    inputs.add_argument("--near", required=True, help="near-field coincidence CSV")
    inputs.add_argument("--far", required=True, help="far-field coincidence CSV")
    inputs.add_argument("--ell", type=float, required=True, help="modular scale in mm")
    inputs.add_argument("--sep", type=float, help="slit separation in mm (coarse-grained criterion)")
    inputs.add_argument("--pairing", choices=("N-S+", "N+S-"), default="N-S+")
    inputs.add_argument("--direction", choices=("1|2", "2|1"), default="1|2")

    p = sub.add_parser("simulate", parents=[shared, geometry, optics], help="write ideal D-slit count maps")
    p.add_argument("--out-near", required=True)
    p.add_argument("--out-far", required=True)
    p.add_argument("--total", type=float, default=1e9, help="total counts per map")
    p.add_argument("--poisson", action="store_true", help="draw Poisson counts using --seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("witness", parents=[shared, inputs], help="entanglement criteria")
    p.add_argument("--criterion", choices=sorted(_ENT), default="all")
    p.add_argument("--trials", type=int, default=0, help="Poisson resampling trials for SD")
    p.add_argument("--svg", help="bar chart of violations")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("steer", parents=[shared, inputs], help="EPR-steering criteria")
    p.add_argument("--criterion", choices=sorted(_STEER), default="all")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--svg", help="bar chart of violations")
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("resample", parents=[shared, inputs], help="Poisson error bars for one criterion")
    p.add_argument("--criterion", default="ent-ent",
                   choices=["var-ent", "ent-ent", "var-steer", "ent-steer", "coarse"])
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("constant-c", parents=[shared], help="uncertainty constant C")
    p.add_argument("--nmax", type=int, default=64)
    p.set_defaults(func=cmd_constant_c)

    p = sub.add_parser("scan-ell", parents=[shared, geometry], help="coarse-grained violation versus ell/d")
    p.add_argument("--near")
    p.add_argument("--far")
    p.add_argument("--pairing", choices=("N-S+", "N+S-"), default="N-S+")
    p.add_argument("--start", type=float, default=0.5)
    p.add_argument("--stop", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.025)
    p.add_argument("--curve-csv", help="write ratio,violation,bins rows here")
    p.add_argument("--svg", help="line chart of the scan")
    p.set_defaults(func=cmd_scan_ell)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    args.argv = argv
    try:
        report = args.func(args)
        _emit(report, args, *_table(report, args))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _table(report: RunReport, args):
    if report.command == "constant-c":
        c = report.extra["constant"]
        return [[c["n_max"], repr(c["c_value"]), repr(c["convergence_delta"])]], ["n_max", "c_value", "convergence_delta"]
    if report.command == "scan-ell":
        s = report.extra["scan"]
        return [[repr(r), repr(v), b] for r, v, b in zip(s["ratios"], s["violations"], s["bins"])], ["ratio", "violation", "bins"]
    if report.command == "resample":
        r = report.extra["resample"]
        return [[report.config["criterion"], repr(r["mean"]), repr(r["sd"])]], ["criterion", "mean", "sd"]
    if report.command == "simulate":
        f = report.extra["files"]
        return [[f["near"], f["far"]]], ["near", "far"]
    return None, None


if __name__ == "__main__":
    sys.exit(main())
