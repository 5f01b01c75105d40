"""Command-line experiment runner.

    dampedwave quasimode --k-list 50,100,200,400 --out runs/qm
    dampedwave spectrum  --k-list 50,100,200 --out runs/oracle
    dampedwave evolve    --model subexp --out runs/decay
    dampedwave resolvent --out runs/res
    dampedwave egorov    --tol 1e-8 --out runs/ego
    dampedwave run       --config experiment.ini
    dampedwave report    runs/qm

Config files are sectioned key = value text (configparser)::

    [run]
    scenario = quasimode_sweep
    out = runs/qm
    seed = 0
    [sweep]
    k_list = 50, 100, 200, 400
    [damping]
    z_a = 0.5
    w = 0.4
    [geometry]
    blend = 0.65

CSV floats use the shortest round-trip decimal (``repr``), so reruns with the
same config and seed are byte-identical.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .experiments import RUNNERS, SCENARIOS, Outcome
from .geometry import DampingProfile, SurfaceProfile

log = logging.getLogger("dampedwave")

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

SUBCOMMAND_SCENARIO = {
    "quasimode": "quasimode_sweep",
    "spectrum": "oracle_sweep",
    "resolvent": "resolvent_scan",
    "egorov": "egorov_suite",
}


class ValidationError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"{float(v.real)!r}{float(v.imag):+}j"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# --- configuration ---

def _parse_list(text: str, cast, name: str) -> List:
    try:
        vals = [cast(s) for s in str(text).replace(";", ",").split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"{name}: cannot parse {text!r}") from exc
    if not vals:
        raise ValidationError(f"{name}: empty list")
    return vals


def _parse_h(s: str) -> float:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/")
        return float(num) / float(den)
    return float(s)


def load_config(path: Optional[str]) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path is not None:
        if not Path(path).is_file():
            raise ValidationError(f"config file {path!r} not found")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ValidationError(f"malformed config: {exc}") from exc
    for sec in ("run", "sweep", "damping", "geometry"):
        if not cp.has_section(sec):
            cp.add_section(sec)
    return cp


def build_kwargs(scenario: str, cp: configparser.ConfigParser) -> Dict:
    """Validate config sections against module preconditions; returns runner kwargs."""
    if scenario not in SCENARIOS:
        raise ValidationError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    kw: Dict = {}
    try:
        geo = {k: float(v) for k, v in cp["geometry"].items()}
        profile = SurfaceProfile(**geo) if geo else None
        dmp = dict(cp["damping"].items())
        if dmp:
            typed = {}
            for k, v in dmp.items():
                typed[k] = int(v) if k == "k_van" else (v if k == "kind" else float(v))
            damping = DampingProfile(**typed)
        else:
            damping = None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid geometry/damping section: {exc}") from exc

    sweep = cp["sweep"]
    if "k_list" in sweep:
        if scenario not in ("quasimode_sweep", "oracle_sweep", "decay_subexp"):
            raise ValidationError(f"k_list does not apply to {scenario}")
        ks = _parse_list(sweep["k_list"], int, "k_list")
        if any(k <= 0 for k in ks):
            raise ValidationError("k_list: every k must be a positive integer")
        if any(k < 50 for k in ks):
            raise ValidationError("k_list: k below 50 is outside the asymptotic regime (k_min = 50)")
        kw["k_list"] = tuple(ks)
    if "h_list" in sweep:
        if scenario not in ("resolvent_scan", "egorov_suite"):
            raise ValidationError(f"h_list does not apply to {scenario}")
        hs = _parse_list(sweep["h_list"], _parse_h, "h_list")
        if any(not (0 < h < 1) for h in hs):
            raise ValidationError("h_list: every h must lie in (0, 1)")
        kw["h_list"] = tuple(hs)
    run = cp["run"]
    seed = run.getint("seed", fallback=0)
    tol = run.get("tol", fallback=None)
    if tol is not None:
        tol = float(tol)
        if not tol > 0:
            raise ValidationError("tol must be positive")
    if scenario in ("quasimode_sweep", "oracle_sweep", "decay_subexp"):
        if damping is not None:
            kw["a"] = damping
        if profile is not None:
            kw["profile"] = profile
    elif damping is not None or profile is not None:
        raise ValidationError(f"geometry/damping sections do not apply to {scenario}")
    if scenario in ("decay_overdamped", "resolvent_scan", "egorov_suite"):
        kw["seed"] = seed
    if scenario == "decay_overdamped" and "n_profiles" in sweep:
        kw["n_profiles"] = sweep.getint("n_profiles")
        if kw["n_profiles"] <= 0:
            raise ValidationError("n_profiles must be positive")
    if tol is not None:
        if scenario != "egorov_suite":
            raise ValidationError("--tol applies to the egorov suite only")
        kw["tol"] = tol
    return kw


# --- run and report ---

def run(scenario: str, cp: configparser.ConfigParser, out_dir: Path) -> int:
    kw = build_kwargs(scenario, cp)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not out_dir.is_dir():
        raise ValidationError(f"output directory {out_dir} is not writable")
    t0 = time.perf_counter()
    try:
        with np.errstate(under="ignore"):
            outcome: Outcome = RUNNERS[scenario](**kw)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure in %s: %s", scenario, exc)
        _write_manifest(out_dir, scenario, cp, None, time.perf_counter() - t0, error=str(exc))
        return EXIT_NUMERICAL
    for name, (header, rows) in outcome.tables.items():
        write_csv(out_dir / f"{name}.csv", header, rows)
    (out_dir / "summary.json").write_text(json.dumps(_jsonable(outcome.summary), indent=2, sort_keys=True))
    _write_manifest(out_dir, scenario, cp, outcome, time.perf_counter() - t0)
    for name, ok in outcome.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {scenario}.{name}")
    return EXIT_OK if outcome.passed else EXIT_CHECKS_FAILED


def _write_manifest(out_dir: Path, scenario: str, cp, outcome: Optional[Outcome], seconds: float,
                    error: Optional[str] = None) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario,
        "config": {s: dict(cp[s].items()) for s in cp.sections()},
        "versions": {"dampedwave": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "seconds": seconds,
        "checks": outcome.checks if outcome else {},
        "passed": outcome.passed if outcome else False,
        "artifacts": sorted(f"{n}.csv" for n in outcome.tables) if outcome else [],
        "error": error,
    }
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True))


def _read_csv(path: Path):
    with open(path, encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def report(run_dir: Path) -> int:
    """Plot-ready columnar files and a human-readable summary for one run directory."""
    mpath = run_dir / "manifest.json"
    if not run_dir.is_dir() or not mpath.is_file():
        raise ValidationError(f"no run artifacts in {run_dir} (manifest.json missing)")
    manifest = json.loads(mpath.read_text())
    missing = [a for a in manifest.get("artifacts", []) if not (run_dir / a).is_file()]
    if missing:
        raise ValidationError(f"missing artifacts: {', '.join(missing)}")
    summary = json.loads((run_dir / "summary.json").read_text()) if (run_dir / "summary.json").is_file() else {}
    scen = manifest["scenario"]
    lines = [f"scenario: {scen}", f"passed: {manifest['passed']}"]
    if scen == "quasimode_sweep":
        _, rows = _read_csv(run_dir / "residuals.csv")
        write_csv(run_dir / "plot_log_h_log_residual.csv", ("log_h", "log_residual", "log_residual_detuned"),
                  [(math.log(float(r[1])), math.log(float(r[4])), math.log(float(r[5]))) for r in rows])
        lines.append(f"residual slope in h: {summary['slope']:.4g}")
    elif scen == "decay_subexp":
        _, rows = _read_csv(run_dir / "envelope.csv")
        write_csv(run_dir / "plot_sqrt_t_log_envelope.csv", ("sqrt_t", "log_f"),
                  [(float(r[1]), float(r[2])) for r in rows])
        _, traj = _read_csv(run_dir / "trajectories.csv")
        write_csv(run_dir / "plot_t_log_E.csv", ("k", "t", "log_E"),
                  [(int(r[0]), float(r[1]), math.log(float(r[2]))) for r in traj])
        lines.append(f"fitted c_delta: {summary['envelope']['c']:.4g} (delta = {summary['delta']})")
        lines.append(f"rate * log k = {summary['rate_law_c']:.4g}, spread {summary['rate_spread']:.3g}")
    elif scen == "resolvent_scan":
        _, rows = _read_csv(run_dir / "smin.csv")
        write_csv(run_dir / "plot_log_inv_h_log_inv_smin.csv", ("variant", "log_inv_h", "log_inv_smin"),
                  [(r[0], -math.log(float(r[3])), -math.log(float(r[4]))) for r in rows
                   if float(r[1]) == 1.0 and float(r[2]) == 0.0])
        for v, s in summary["variants"].items():
            lines.append(f"{v}: nu = {s['nu']:.4g} +- {s['nu_err']:.2g} (log-corrected {s['nu_log_corrected']:.4g})")
        for name, cfit in summary.get("cutoff", {}).items():
            lines.append(f"cutoff estimate ({name}): nu = {cfit['nu']:.4g}")
    elif scen == "oracle_sweep":
        lines.append(f"relative Im tau error vs oracle: {summary['oracle_rel_err']}")
    elif scen == "decay_overdamped":
        lines.append(f"fitted rates: {summary['rates']}")
    elif scen == "egorov_suite":
        lines.append(f"egorov residuals: {summary['egorov']}")
    for name, ok in manifest["checks"].items():
        lines.append(f"  {'PASS' if ok else 'FAIL'} {name}")
    text = "\n".join(lines) + "\n"
    (run_dir / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dampedwave", description="Damped-wave spectral experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_):
        sp_.add_argument("--config", help="sectioned key=value config file")
        sp_.add_argument("--out", help="output directory (default runs/<scenario>)")
        sp_.add_argument("--seed", type=int, help="seed for randomized inputs")
        sp_.add_argument("--tol", type=float, help="pass/fail tolerance (egorov suite)")

    for name in ("quasimode", "spectrum", "evolve", "resolvent", "egorov"):
        sp_ = sub.add_parser(name)
        common(sp_)
        if name in ("quasimode", "spectrum", "evolve"):
            sp_.add_argument("--k-list", help="comma-separated angular modes")
        if name in ("resolvent", "egorov"):
            sp_.add_argument("--h-list", help="comma-separated h values (1/50 allowed)")
        if name == "evolve":
            sp_.add_argument("--model", choices=("subexp", "overdamped"), default="subexp")
    r = sub.add_parser("run")
    common(r)
    r.add_argument("--scenario", choices=SCENARIOS)
    rep = sub.add_parser("report")
    rep.add_argument("run_dir")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return report(Path(args.run_dir))
        cp = load_config(args.config)
        if args.command == "run":
            scenario = args.scenario or cp["run"].get("scenario")
            if scenario is None:
                raise ValidationError("no scenario given (use --scenario or [run] scenario)")
        elif args.command == "evolve":
            scenario = "decay_subexp" if args.model == "subexp" else "decay_overdamped"
        else:
            scenario = SUBCOMMAND_SCENARIO[args.command]
        if getattr(args, "k_list", None):
            cp["sweep"]["k_list"] = args.k_list
        if getattr(args, "h_list", None):
            cp["sweep"]["h_list"] = args.h_list
        if args.seed is not None:
            cp["run"]["seed"] = str(args.seed)
        if args.tol is not None:
            cp["run"]["tol"] = repr(args.tol)
        out = Path(args.out or cp["run"].get("out", f"runs/{scenario}"))
        return run(scenario, cp, out)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
