"""Command line entry point.

Usage::

    ferulam <command> [--config PATH] [--seed N] [--workers N] [--out DIR]

Commands: simulate, census, drift, decompose, counterexample, validate.
The config is a single JSON file with a ``forcing`` entry (inline object or
path to a forcing file) and one optional section per command.  Flags beat
the file, the file beats built-in defaults; ``FERULAM_OUT`` beats ``--out``.
Exit codes: 0 success, 2 bad configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import census as census_mod
from .exceptions import BelowThreshold, ConfigError, ConstructionFailed, NoConvergence
from .forcing import ForcingSpec, energy_threshold, standard_spec, v_star
from .invariants import delta_modulus, drift_sample, drift_scaling, estimate_drift_constant
from .io import canonical_json, config_hash, svg_lines, write_csv, write_json
from .pingpong import PhaseStateTE, build_noninjectivity_example, default_floor, iterate
from .rng import stream_key
from .torus import check_haar_decomposition, random_rectangles

COMMANDS = ("simulate", "census", "drift", "decompose", "counterexample", "validate")

DEFAULTS = {
    "seed": 0,
    "simulate": {"omega": None, "t0": 0.0, "E0": 50.0, "n_max": 1000, "E_floor": None},
    "census": {
        "n_omega": 8,
        "n_orbits": 1000,
        "t0_range": [0.0, 1.0],
        "E0_range": [30.0, 100.0],
        "n_max": 10000,
        "E_esc": 300.0,
        "E_floor": None,
        "window": 2e-4,
    },
    "drift": {
        "decades": [2, 3, 4, 5],
        "n_per_decade": 1000,
        "n_calibrate": 10000,
        "n_check": 100000,
        "E_range": [100.0, 1e6],
        "C": 1.0,
        "safety": 1.5,
    },
    "decompose": {"n": 100000, "n_random": 20, "min_width": 0.1, "rectangles": None},
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = p.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    cfg["_base"] = str(p.parent)
    return cfg


def _load_forcing(cfg: dict) -> tuple[ForcingSpec, dict]:
    raw = cfg.get("forcing")
    if raw is None:
        spec = standard_spec()
        return spec, spec.to_dict()
    if isinstance(raw, str):
        path = Path(raw)
        if not path.is_absolute():
            path = Path(cfg.get("_base", ".")) / path
        if not path.exists():
            raise ConfigError(f"forcing file {raw} does not exist")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        spec = ForcingSpec.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid forcing: {exc}") from None
    return spec, spec.to_dict()


def resolve(args) -> dict:
    """Merge defaults, file and flags into one fully explicit config."""
    cfg = _load_config(args.config)
    spec, forcing = _load_forcing(cfg)
    unknown = set(cfg) - set(DEFAULTS) - {"forcing", "_base"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {"forcing": forcing, "seed": cfg.get("seed", DEFAULTS["seed"])}
    for section in ("simulate", "census", "drift", "decompose"):
        merged = dict(DEFAULTS[section])
        given = cfg.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be an object")
        extra = set(given) - set(merged)
        if extra:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(extra)}")
        merged.update(given)
        out[section] = merged
    if args.seed is not None:
        out["seed"] = args.seed
    if not isinstance(out["seed"], int) or out["seed"] < 0 or out["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    _validate(spec, out)
    return out


def _validate(spec: ForcingSpec, cfg: dict) -> None:
    thr = energy_threshold(spec)
    sim = cfg["simulate"]
    if sim["omega"] is not None and len(sim["omega"]) != spec.dim:
        raise ConfigError("simulate.omega must have one entry per torus dimension")
    floor = default_floor(spec) if sim["E_floor"] is None else sim["E_floor"]
    if floor < thr:
        raise ConfigError("simulate.E_floor lies below v*^2 / 2")
    if not sim["E0"] > floor:
        raise ConfigError("simulate.E0 must exceed E_floor")
    if not (isinstance(sim["n_max"], int) and sim["n_max"] >= 1):
        raise ConfigError("simulate.n_max must be a positive integer")
    _census_config(spec, cfg)
    dr = cfg["drift"]
    if not dr["E_range"][0] > thr or any(10.0**k <= thr for k in dr["decades"]):
        raise ConfigError("drift energies must lie above v*^2 / 2")
    for key in ("n_per_decade", "n_calibrate", "n_check"):
        if not (isinstance(dr[key], int) and dr[key] >= 1):
            raise ConfigError(f"drift.{key} must be a positive integer")
    if len(dr["decades"]) < 2:
        raise ConfigError("drift.decades needs at least two entries for a fit")
    dec = cfg["decompose"]
    if not (isinstance(dec["n"], int) and dec["n"] >= 1):
        raise ConfigError("decompose.n must be a positive integer")
    if dec["rectangles"] is not None:
        for lo, hi in dec["rectangles"]:
            if len(lo) != spec.dim or len(hi) != spec.dim:
                raise ConfigError("rectangle corners must have one entry per dimension")
            if any(not (0.0 <= a < b <= 1.0) for a, b in zip(lo, hi)):
                raise ConfigError("rectangle sides must satisfy 0 <= lo < hi <= 1")


def _census_config(spec: ForcingSpec, cfg: dict) -> census_mod.CensusConfig:
    c = cfg["census"]
    try:
        cc = census_mod.CensusConfig(
            spec=spec,
            n_omega=int(c["n_omega"]),
            n_orbits=int(c["n_orbits"]),
            t0_range=tuple(c["t0_range"]),
            E0_range=tuple(c["E0_range"]),
            n_max=int(c["n_max"]),
            E_esc=float(c["E_esc"]),
            E_floor=c["E_floor"],
            seed=cfg["seed"],
            window=float(c["window"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid census section: {exc}") from None
    return cc.validate()


def _envelope(cfg: dict, command: str) -> dict:
    return {"command": command, "config": cfg, "config_hash": config_hash(cfg), "seed": cfg["seed"]}


def cmd_simulate(cfg: dict, out: Path, workers: int) -> int:
    spec = ForcingSpec.from_dict(cfg["forcing"])
    sim = cfg["simulate"]
    omega = np.zeros(spec.dim) if sim["omega"] is None else np.asarray(sim["omega"], dtype=float)
    tr = iterate(spec, omega, PhaseStateTE(sim["t0"], sim["E0"]), sim["n_max"], sim["E_floor"])
    res = np.concatenate([[np.nan], tr.residuals])
    rows = [(n, tr.t[n], tr.E[n], np.sqrt(2 * tr.E[n]), tr.W[n], res[n]) for n in range(len(tr))]
    write_csv(out / "orbit.csv", ["step", "t", "E", "v", "W", "residual"], rows)
    (out / "orbit.svg").write_text(
        svg_lines([("E", tr.t, tr.E)], title="energy at the fixed plate", xlabel="t", ylabel="E")
    )
    rep = _envelope(cfg, "simulate")
    rep.update({"status": tr.status.value, "status_step": tr.status_step, "steps": len(tr) - 1})
    write_json(out / "simulate.json", rep)
    print(f"{tr.status.value} after {tr.status_step} steps -> {out / 'orbit.csv'}")
    return 0


def cmd_census(cfg: dict, out: Path, workers: int) -> int:
    spec = ForcingSpec.from_dict(cfg["forcing"])
    cc = _census_config(spec, cfg)
    results = census_mod.simulate(cc, workers)
    report = census_mod.build_report(cc, results)
    prof = census_mod.profile_from_results(cc, results)
    rep = _envelope(cfg, "census")
    rep["report"] = report.to_dict()
    rep["recurrence"] = {
        "no_return_at": {str(h): prof.no_return_at(h) for h in cc.horizons},
        "no_return": prof.no_return,
        "total": prof.total,
    }
    write_json(out / "census.json", rep)
    rows = []
    for o in report.omegas:
        for h in cc.horizons:
            e = o["horizons"][str(h)]
            c = e["counts"]
            rows.append(
                (o["index"], h, c["EscapingCandidate"], c["Returned"], c["LeftDomain"], c["Alive"],
                 e["escape_fraction"], e["wilson95"][0], e["wilson95"][1])
            )
    write_csv(
        out / "census.csv",
        ["omega_index", "horizon", "escaping_candidate", "returned", "left_domain", "alive",
         "escape_fraction", "wilson_lo", "wilson_hi"],
        rows,
    )
    steps = np.flatnonzero(prof.counts)
    write_csv(
        out / "recurrence.csv",
        ["first_return_step", "count"],
        [(int(s), int(prof.counts[s])) for s in steps] + [(-1, prof.no_return)],
    )
    series = [
        (f"omega {o['index']}", cc.horizons, [o["horizons"][str(h)]["escape_fraction"] for h in cc.horizons])
        for o in report.omegas
    ]
    (out / "escape.svg").write_text(
        svg_lines(series, title="escape-candidate fraction", xlabel="horizon", ylabel="fraction")
    )
    hs = [str(h) for h in cc.horizons]
    print("escape-candidate fraction: " + ", ".join(f"h={h}: {report.pooled['escape_fraction'][h]:.4g}" for h in hs))
    return 0


def cmd_drift(cfg: dict, out: Path, workers: int) -> int:
    spec = ForcingSpec.from_dict(cfg["forcing"])
    d = cfg["drift"]
    seed = cfg["seed"]
    scaling = drift_scaling(spec, tuple(d["decades"]), d["n_per_decade"], seed, d["C"])
    E_range = tuple(d["E_range"])
    C_hat = estimate_drift_constant(spec, d["n_calibrate"], E_range, int(stream_key(seed, 11)[0]), C=d["C"])
    check = drift_sample(spec, d["n_check"], E_range, int(stream_key(seed, 12)[0]), C=d["C"])
    limit = d["safety"] * C_hat * check.delta_bound
    violations = int(np.sum(check.drift > limit))
    write_csv(
        out / "drift.csv",
        ["E0", "drift", "delta_bound", "ratio"],
        zip(check.E0, check.drift, check.delta_bound, check.ratio),
    )
    write_csv(
        out / "drift_decades.csv",
        ["decade_lo", "max_drift", "delta_at_lo"],
        zip(scaling.decade_lo, scaling.max_drift, delta_modulus(spec, scaling.decade_lo, d["C"])),
    )
    rep = _envelope(cfg, "drift")
    rep.update(
        {
            "slope": scaling.slope,
            "intercept": scaling.intercept,
            "r_squared": scaling.r_squared,
            "C_hat": C_hat,
            "violations": violations,
            "n_check": d["n_check"],
        }
    )
    write_json(out / "drift.json", rep)
    print(f"slope {scaling.slope:.4f}  R^2 {scaling.r_squared:.4f}  C_hat {C_hat:.6g}  violations {violations}")
    return 0


def cmd_decompose(cfg: dict, out: Path, workers: int) -> int:
    spec = ForcingSpec.from_dict(cfg["forcing"])
    d = cfg["decompose"]
    if d["rectangles"] is None:
        rects = random_rectangles(cfg["seed"], d["n_random"], spec.dim, d["min_width"])
    else:
        rects = [(np.asarray(lo, float), np.asarray(hi, float)) for lo, hi in d["rectangles"]]
    rows = check_haar_decomposition(spec, d["n"], rects, cfg["seed"])
    write_csv(
        out / "decompose.csv",
        ["set_id", "haar_estimate", "product_estimate", "diff", "three_sigma", "pass"],
        [(r.set_id, r.haar_estimate, r.product_estimate, r.diff, r.three_sigma, r.passed) for r in rows],
    )
    rep = _envelope(cfg, "decompose")
    rep["rectangles"] = [[lo.tolist(), hi.tolist()] for lo, hi in rects]
    rep["passed"] = sum(r.passed for r in rows)
    rep["total"] = len(rows)
    write_json(out / "decompose.json", rep)
    for r in rows:
        print(f"set {r.set_id:3d}  diff {r.diff:.3e}  3sigma {r.three_sigma:.3e}  {'PASS' if r.passed else 'FAIL'}")
    return 0


def cmd_counterexample(cfg: dict, out: Path, workers: int) -> int:
    ex = build_noninjectivity_example()
    header = ["point", "t", "v", "image_t", "image_v", "max_diff"]
    rows = [
        ("preimage_1", ex.pre1.t, ex.pre1.v, ex.image1.t, ex.image1.v, ex.max_diff),
        ("preimage_2", ex.pre2.t, ex.pre2.v, ex.image2.t, ex.image2.v, ex.max_diff),
    ]
    write_csv(out / "counterexample.csv", header, rows)
    rep = _envelope(cfg, "counterexample")
    rep.update({"forcing_time_domain": ex.forcing, "v1": ex.v1, "max_diff": ex.max_diff})
    write_json(out / "counterexample.json", rep)
    print("  ".join(f"{h:>22s}" for h in header))
    for row in rows:
        print("  ".join(f"{x:>22s}" if isinstance(x, str) else f"{x:>22.17g}" for x in row))
    return 0


def cmd_validate(cfg: dict, out: Path, workers: int) -> int:
    spec = ForcingSpec.from_dict(cfg["forcing"])
    bound, est = v_star(spec)
    print(canonical_json({"config": cfg, "config_hash": config_hash(cfg)}), end="")
    print(f"a = {spec.lower:.6g}, b = {spec.upper:.6g}, v* bound = {bound:.6g}, v* grid = {est:.6g}")
    return 0


HANDLERS = {
    "simulate": cmd_simulate,
    "census": cmd_census,
    "drift": cmd_drift,
    "decompose": cmd_decompose,
    "counterexample": cmd_counterexample,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ferulam", description="Quasi-periodic Fermi-Ulam ping-pong experiments")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for the census")
    ap.add_argument("--out", default=".", help="output directory (FERULAM_OUT overrides)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(os.environ.get("FERULAM_OUT") or args.out)
    try:
        cfg = resolve(args)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command != "validate":
        out.mkdir(parents=True, exist_ok=True)
    try:
        return HANDLERS[args.command](cfg, out, args.workers)
    except (NoConvergence, BelowThreshold, ConstructionFailed, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
