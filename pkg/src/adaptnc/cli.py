"""Command line: run experiments from YAML configs, sweep seeds, build tables.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .adaptive import AdaptncConfig, MckdeConfig, RunResult
from .baselines import METHODS, run_method
from .envs import ENVIRONMENTS, config_fields, make_env
from .errors import AdaptncError, ConfigError, InvalidInput, MissingRuns
from .metrics import summarize

log = logging.getLogger(__name__)

TOP_KEYS = {"env", "env_params", "methods", "seeds", "adaptnc", "output_dir", "local_window", "length"}
CSV_COLUMNS = ("t", "method", "env", "seed", "alpha_bar", "q", "covered", "volume", "vacuous",
               "theta_version")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    env: str
    env_params: dict
    methods: tuple
    seeds: tuple
    adaptnc: AdaptncConfig
    output_dir: Path
    local_window: int = 100
    length: int | None = None


def _adaptnc_config(raw) -> AdaptncConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("adaptnc", "expected a mapping")
    fields = {f.name for f in dataclasses.fields(AdaptncConfig)}
    for key in raw:
        if key not in fields:
            raise ConfigError(f"adaptnc.{key}", "unknown key")
    kw = dict(raw)
    if "mckde" in kw:
        mk = kw["mckde"] or {}
        mfields = {f.name for f in dataclasses.fields(MckdeConfig)}
        for key in mk:
            if key not in mfields:
                raise ConfigError(f"adaptnc.mckde.{key}", "unknown key")
        kw["mckde"] = MckdeConfig(**mk)
    if "gammas" in kw:
        kw["gammas"] = tuple(float(g) for g in kw["gammas"])
    try:
        cfg = AdaptncConfig(**kw)
        cfg.validate()
    except (InvalidInput, TypeError, ValueError) as exc:
        raise ConfigError("adaptnc", str(exc)) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment YAML; raises ``ConfigError`` naming the bad key."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("path", f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("yaml", str(exc)) from None
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")
    for key in raw:
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown key")
    env = raw.get("env")
    if env not in ENVIRONMENTS:
        raise ConfigError("env", f"must be one of {sorted(ENVIRONMENTS)}, got {env!r}")
    params = raw.get("env_params") or {}
    if not isinstance(params, dict):
        raise ConfigError("env_params", "expected a mapping")
    for key in params:
        if key not in config_fields(env):
            raise ConfigError(f"env_params.{key}", f"unknown {env} parameter")
    try:
        make_env(env, params, length=1)
    except (InvalidInput, TypeError, ValueError) as exc:
        raise ConfigError("env_params", str(exc)) from None

    methods = raw.get("methods", list(METHODS))
    if isinstance(methods, str):
        methods = [methods]
    for m in methods:
        if m not in METHODS:
            raise ConfigError("methods", f"unknown method {m!r}; choose from {METHODS}")
    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("seeds", "expected a nonempty list of nonnegative integers")
    local_window = raw.get("local_window", 100)
    if not isinstance(local_window, int) or local_window < 1:
        raise ConfigError("local_window", "must be a positive integer")
    length = raw.get("length")
    if length is not None and (not isinstance(length, int) or length < 1):
        raise ConfigError("length", "must be a positive integer")
    return ExperimentConfig(
        env=env,
        env_params=dict(params),
        methods=tuple(methods),
        seeds=tuple(seeds),
        adaptnc=_adaptnc_config(raw.get("adaptnc")),
        output_dir=Path(raw.get("output_dir", "runs")),
        local_window=local_window,
        length=length,
    )


def stream_checksum(observations) -> str:
    h = hashlib.sha256()
    for obs in observations:
        h.update(np.int64(obs.t).tobytes())
        h.update(np.ascontiguousarray(obs.y, dtype=float).tobytes())
        h.update(np.ascontiguousarray(obs.y_hat, dtype=float).tobytes())
    return h.hexdigest()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def records_csv(result: RunResult, method: str, env: str, seed: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.records:
        w.writerow((r.t, method, env, seed, _num(r.alpha_bar), _num(r.q), int(r.covered),
                    _num(r.volume), int(r.vacuous), r.theta_version))
    return buf.getvalue()


def weights_csv(result: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *(f"gamma_{_num(g)}" for g in result.gammas)])
    for r in result.records:
        w.writerow([r.t, *(_num(p) for p in r.weights)])
    return buf.getvalue()


def run_stem(env: str, method: str, seed: int) -> str:
    return f"{env}_{method}_seed{seed}"


def run_seed(cfg: ExperimentConfig, seed: int, methods=None) -> list:
    """Generate one stream and run every method on it; returns the summaries."""
    adapt = dataclasses.replace(cfg.adaptnc, seed=seed)
    env = make_env(cfg.env, cfg.env_params, calibration=adapt.calibration_size, seed=seed,
                   length=cfg.length)
    observations = env.observations()
    checksum = stream_checksum(observations)
    out = []
    for method in methods or cfg.methods:
        result = run_method(method, observations, adapt)
        summary = summarize(result.records, min(cfg.local_window, len(result.records)))
        payload = {
            "env": cfg.env,
            "method": method,
            "seed": seed,
            "stream_checksum": checksum,
            "theta_updates": len(result.thetas) - 1,
            **summary.to_dict(),
        }
        stem = run_stem(cfg.env, method, seed)
        atomic_write(cfg.output_dir / f"{stem}.csv", records_csv(result, method, cfg.env, seed))
        atomic_write(cfg.output_dir / f"{stem}.weights.csv", weights_csv(result))
        atomic_write(cfg.output_dir / f"{stem}.summary.json",
                     json.dumps(payload, indent=2, sort_keys=True, default=_num) + "\n")
        out.append(payload)
    return out


def _seed_job(args):
    cfg, seed, methods = args
    return run_seed(cfg, seed, methods)


def parse_seeds(text: str) -> list:
    """``"0..9"`` (inclusive), ``"3"`` or ``"0,2,5"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(s) for s in text.split(",")]
    except ValueError:
        raise ConfigError("--seeds", f"expected a..b or a comma list, got {text!r}") from None


def max_workers(jobs: int) -> int:
    env = os.environ.get("ADAPTNC_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError("ADAPTNC_THREADS", f"expected an integer, got {env!r}") from None
    return max(1, min(cap, jobs))


def sweep(cfg: ExperimentConfig, seeds, methods=None) -> list:
    jobs = [(cfg, s, methods) for s in seeds]
    workers = max_workers(len(jobs))
    if workers == 1:
        results = [_seed_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_seed_job, jobs))
    return [p for chunk in results for p in chunk]


def load_summaries(directory) -> list:
    return [json.loads(p.read_text()) for p in sorted(Path(directory).glob("*.summary.json"))]


def _fmt_pct(values) -> str:
    # Spread across seeds.
    v = np.asarray(values, float) * 100
    return f"{v.mean():6.2f} ± {v.std():5.2f}"


def _fmt_vol(values) -> str:
    v = np.asarray([x for x in values if x is not None and math.isfinite(float(x))], float)
    return f"{v.mean():10.4g}" if len(v) else f"{'nan':>10}"


def reproduce_tables(directory, envs=None, methods=METHODS) -> str:
    """Coverage/volume table and vacuity table over every summary in ``directory``."""
    summaries = load_summaries(directory)
    cells: dict = {}
    for s in summaries:
        cells.setdefault((s["method"], s["env"]), []).append(s)
    envs = sorted({e for _, e in cells}) if envs is None else list(envs)
    if not envs:
        raise MissingRuns([(m, "<any>") for m in methods])
    missing = [(m, e) for e in envs for m in methods if (m, e) not in cells]
    if missing:
        raise MissingRuns(missing)

    lines = ["Coverage and volume (mean ± std over seeds)"]
    head = f"{'env':<13}{'method':<19}{'seeds':>5}  {'coverage %':>15}  {'volume':>10}  {'local %':>15}"
    lines += [head, "-" * len(head)]
    for e in envs:
        for m in methods:
            rows = cells[(m, e)]
            lines.append(
                f"{e:<13}{m:<19}{len(rows):>5}  {_fmt_pct([r['global_coverage'] for r in rows]):>15}  "
                f"{_fmt_vol([r['mean_volume_covered'] for r in rows])}  "
                f"{100 * np.mean([r['local_mean'] for r in rows]):6.2f} ± "
                f"{100 * np.mean([r['local_std'] for r in rows]):5.2f}"
            )
    lines += ["", "Vacuous steps %"]
    head = f"{'method':<19}" + "".join(f"{e:>14}" for e in envs)
    lines += [head, "-" * len(head)]
    for m in methods:
        vals = "".join(f"{100 * np.mean([r['vacuous_fraction'] for r in cells[(m, e)]]):14.2f}"
                       for e in envs)
        lines.append(f"{m:<19}{vals}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptnc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log refits and fallbacks")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the config's seeds and methods")
    r.add_argument("config", help="experiment YAML")
    r.add_argument("--method", action="append", choices=METHODS,
                   help="method to run (repeatable); defaults to the config's methods")
    r.add_argument("--seed", type=int, action="append", help="seed override (repeatable)")
    r.add_argument("--out", help="output directory override")

    s = sub.add_parser("sweep", help="run seeds in parallel, capped by ADAPTNC_THREADS")
    s.add_argument("config", help="experiment YAML")
    s.add_argument("--seeds", required=True, help="inclusive range a..b or comma list")
    s.add_argument("--method", action="append", choices=METHODS, help="method (repeatable)")
    s.add_argument("--out", help="output directory override")

    t = sub.add_parser("report", help="print coverage and vacuity tables for a run directory")
    t.add_argument("dir", help="directory holding *.summary.json files")
    t.add_argument("--env", action="append", help="restrict to these environments")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            text = reproduce_tables(args.dir, args.env)
            atomic_write(Path(args.dir) / "tables.txt", text)
            sys.stdout.write(text)
            return 0
        cfg = load_config(args.config)
        if args.out:
            cfg = dataclasses.replace(cfg, output_dir=Path(args.out))
        if args.command == "run":
            seeds = args.seed or list(cfg.seeds)
            payloads = sweep(cfg, seeds, args.method) if len(seeds) > 1 else run_seed(
                cfg, seeds[0], args.method)
        else:
            payloads = sweep(cfg, parse_seeds(args.seeds), args.method)
        for pl in payloads:
            print(f"{pl['env']} {pl['method']} seed={pl['seed']} "
                  f"coverage={pl['global_coverage']:.4f} volume={pl['mean_volume_covered']:.4g} "
                  f"vacuous={pl['vacuous_fraction']:.4f}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (AdaptncError, OSError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
