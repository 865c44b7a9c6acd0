"""Command-line entry point.

    surfnoise generate      --config run.toml --out runs/a
    surfnoise estimate-mcmc --config run.toml --data runs/a/syndromes.txt --out runs/b
    surfnoise estimate-smc  --config run.toml --data runs/a/syndromes.txt --out runs/c
    surfnoise heatmap       --config run.toml --data runs/a/syndromes.txt --out runs/d
    surfnoise decode-eval   --config run.toml --out runs/e

Every command writes its outputs, the normalized configuration and a
``manifest.json`` with SHA-256 checksums into the output directory.  Numbers
are written with 17 significant digits.  Random streams are derived from the
master seed and a fixed stream id per purpose, so results depend only on
(config, seed, workers) and not on scheduling.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_hash, dumps, load_config, scientific_part
from .decoders import MLDecoder, MWPMDecoder, estimate_process_choi, pauli_twirl
from .estimators import (
    PriorBox,
    RandomWalkProposal,
    rng_stream,
    run_mcmc,
    run_smc,
)
from .likelihood import get_evaluator, sample_syndromes
from .noise_models import NoiseFamily, NoiseModel
from .surface_code import SyndromeBatch, read_syndrome_file, write_syndrome_file

__all__ = ["main", "build_parser", "verify_manifest"]

FMT = "{:.17g}"

# stream ids under the master seed
STREAM_GENERATE = 0
STREAM_MCMC = 1
STREAM_SMC = 2
STREAM_DECODE = 3


def _code_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(x) -> str:
    return FMT.format(float(x))


def write_manifest(out: Path, cfg: RunConfig, command: str, files: list[str], started: float) -> None:
    """Inventory of ``files`` with checksums; timestamps are the only run-dependent fields."""
    manifest = {
        "command": command,
        "config_hash": config_hash(cfg.raw),
        "code_version": _code_version(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "files": {name: _sha256(out / name) for name in sorted(files)},
        "timestamps": {
            "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
            "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def verify_manifest(out: str | Path) -> list[str]:
    """Names of listed files whose checksum no longer matches (empty when intact)."""
    out = Path(out)
    manifest = json.loads((out / "manifest.json").read_text())
    return [n for n, h in manifest["files"].items()
            if not (out / n).is_file() or _sha256(out / n) != h]


def _prepare(cfg: RunConfig, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dumps(scientific_part(cfg.raw)))
    return ["config.toml"]


def _load_data(cfg: RunConfig, data: str | None) -> SyndromeBatch:
    if data is None:
        raise ConfigError(["--data: this command needs a syndrome file"])
    layout = cfg.layout()
    batch = read_syndrome_file(data, layout)
    batch.check_layout(layout)
    if len(batch) == 0:
        raise ConfigError([f"--data: {data} contains no syndrome cycles"])
    return SyndromeBatch(batch.outcomes, cfg.raw["data"]["first_cycle"])


def _pool_map(fn, jobs: list, workers: int) -> list:
    """Order-preserving map; results never depend on the worker count."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


# -- generate ----------------------------------------------------------------------


def cmd_generate(cfg: RunConfig, out: Path) -> list[str]:
    files = _prepare(cfg, out)
    layout = cfg.layout()
    n = cfg.raw["data"]["cycles"]
    first = cfg.raw["data"]["first_cycle"]
    truth = cfg.true_model()
    batch = sample_syndromes(layout, truth, n, rng_stream(cfg.seed, STREAM_GENERATE),
                             cfg.initial_state, cfg.chi, first_cycle=first)
    header = [
        f"layout {layout.rows}x{layout.cols}",
        f"cycles {n} first_cycle {first}",
        f"seed {cfg.seed}",
        f"config {config_hash(cfg.raw)}",
    ]
    write_syndrome_file(out / "syndromes.txt", batch, header)
    return files + ["syndromes.txt"]


# -- estimation --------------------------------------------------------------------


def _mcmc_job(job):
    raw, outcomes, chain = job
    cfg = RunConfig(raw)
    m = cfg.raw["mcmc"]
    fam = cfg.family()
    batch = SyndromeBatch(outcomes, cfg.raw["data"]["first_cycle"])
    return run_mcmc(batch, cfg.layout(), fam, PriorBox(cfg.domain()),
                    RandomWalkProposal(cfg.step_widths("mcmc")), m["total"], m["burn_in"],
                    cfg.chi, rng_stream(cfg.seed, STREAM_MCMC, chain), cfg.initial_state, m["thin"])


def cmd_estimate_mcmc(cfg: RunConfig, out: Path, data: str | None) -> list[str]:
    batch = _load_data(cfg, data)
    files = _prepare(cfg, out)
    chains = cfg.raw["mcmc"]["chains"]
    traces = _pool_map(_mcmc_job, [(cfg.raw, batch.outcomes, k) for k in range(chains)], cfg.workers)
    rows = []
    names = cfg.family().param_names
    for k, tr in enumerate(traces):
        name = f"chain_{k}.csv"
        tr.to_csv(out / name)
        files.append(name)
        q = tr.quantiles((0.025, 0.5, 0.975))
        for i, p in enumerate(names):
            rows.append([str(k), p, _f(tr.eap()[i]), _f(np.std(tr.samples[:, i])), _f(q[0, i]),
                         _f(q[1, i]), _f(q[2, i]), _f(tr.acceptance_ratio), _f(tr.autocorr_time[i])])
    if chains > 1:
        pooled = np.concatenate([t.samples for t in traces])
        q = np.quantile(pooled, (0.025, 0.5, 0.975), axis=0)
        acc = np.mean([t.acceptance_ratio for t in traces])
        for i, p in enumerate(names):
            rows.append(["all", p, _f(pooled[:, i].mean()), _f(pooled[:, i].std()), _f(q[0, i]),
                         _f(q[1, i]), _f(q[2, i]), _f(acc), ""])
    _write_csv(out / "summary.csv", ["chain", "parameter", "eap", "std", "q025", "q500", "q975",
                                      "acceptance", "autocorr_time"], rows)
    return files + ["summary.csv"]


def cmd_estimate_smc(cfg: RunConfig, out: Path, data: str | None) -> list[str]:
    batch = _load_data(cfg, data)
    files = _prepare(cfg, out)
    s = cfg.raw["smc"]
    series = run_smc(batch, cfg.layout(), cfg.family(), PriorBox(cfg.domain()),
                     RandomWalkProposal(cfg.step_widths("smc")), s["particles"],
                     s["resample_interval"], s["smoothing"], cfg.chi,
                     rng_stream(cfg.seed, STREAM_SMC), cfg.initial_state)
    series.to_csv(out / "series.csv")
    rows = []
    for i, p in enumerate(cfg.family().param_names):
        rows.append([p, _f(series.eap[-1, i]), _f(series.smoothed[-1, i]),
                     _f(series.ess.mean()), str(int(series.resampled.sum()))])
    _write_csv(out / "summary.csv", ["parameter", "final_eap", "final_smoothed", "mean_ess",
                                      "resamples"], rows)
    return files + ["series.csv", "summary.csv"]


# -- heatmap -----------------------------------------------------------------------


def _heatmap_job(job):
    raw, uniq, counts, points = job
    cfg = RunConfig(raw)
    ev = get_evaluator(cfg.layout(), cfg.family(), cfg.initial_state, cfg.chi)
    out = []
    for alpha in points:
        lp = ev.log_probabilities(alpha, uniq)
        out.append(-np.inf if np.any(np.isneginf(lp)) else float(np.dot(counts, lp)))
    return out


def heatmap_grid(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    dom = cfg.domain()
    h = cfg.raw["heatmap"]
    axes = []
    for i, key in enumerate(("x_range", "y_range")):
        lo, hi = h.get(key, (dom.lower[i], dom.upper[i]))
        n = h["points"][i]
        axes.append(np.array([0.5 * (lo + hi)]) if n == 1 else np.linspace(lo, hi, n))
    return axes[0], axes[1]


def cmd_heatmap(cfg: RunConfig, out: Path, data: str | None) -> list[str]:
    fam = cfg.family()
    if fam.dim != 2:
        raise ConfigError([f"heatmap: needs exactly two free parameters, {fam.kind} "
                           f"has {fam.dim} ({', '.join(fam.param_names) or 'none'})"])
    batch = _load_data(cfg, data)
    files = _prepare(cfg, out)
    xs, ys = heatmap_grid(cfg)
    pts = np.array([(x, y) for x in xs for y in ys])
    uniq, counts = batch.unique_counts()
    chunks = np.array_split(pts, max(1, min(cfg.workers * 4, len(pts))))
    vals = _pool_map(_heatmap_job, [(cfg.raw, uniq, counts, c) for c in chunks], cfg.workers)
    ll = [v for part in vals for v in part]
    names = fam.param_names
    _write_csv(out / "heatmap.csv", [names[0], names[1], "log_likelihood"],
               [[_f(p[0]), _f(p[1]), _f(v)] for p, v in zip(pts, ll)])
    return files + ["heatmap.csv"]


# -- decoder evaluation ------------------------------------------------------------


def pauli_assumption(model: NoiseModel) -> NoiseModel:
    """Per-qubit Pauli twirl of ``model``: the best Pauli-channel description of it."""
    fam = model.family
    per = fam.per_qubit(model.alpha)
    twirled = np.array([pauli_twirl(fam.kind, row) if fam.channel_params else (0.0, 0.0, 0.0)
                        for row in per])
    pfam = NoiseFamily("pauli", fam.n_qubits, uniform=fam.uniform)
    return pfam.model(pfam.pack(twirled))


def _model_hash(model: NoiseModel) -> str:
    text = model.family.kind + ":" + ",".join(FMT.format(v) for v in model.alpha)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _decode_job(job):
    raw, variant = job
    cfg = RunConfig(raw)
    d = cfg.raw["decode"]
    layout = cfg.layout()
    truth = cfg.true_model(cycle=d["cycle"])
    if variant == "mwpm":
        dec = MWPMDecoder(layout)
    else:
        assumed = {
            "ml_true": lambda: truth,
            "ml_assumed": lambda: cfg.model_from(d["assumed"]),
            "ml_estimated": lambda: cfg.model_from(d["estimated"]),
            "ml_pauli": lambda: pauli_assumption(truth),
        }[variant]()
        dec = MLDecoder(layout, assumed, cfg.chi)
    n = d["samples"] or None
    est = estimate_process_choi(layout, dec, truth, n, cfg.chi, rng_stream(cfg.seed, STREAM_DECODE),
                                n_batches=d["batches"], restarts=d["restarts"])
    return [variant, _model_hash(truth), str(est.n_samples if n else 0), _f(est.metric),
            _f(est.standard_error)]


def cmd_decode_eval(cfg: RunConfig, out: Path) -> list[str]:
    files = _prepare(cfg, out)
    rows = _pool_map(_decode_job, [(cfg.raw, v) for v in cfg.raw["decode"]["variants"]], cfg.workers)
    _write_csv(out / "metrics.csv", ["decoder", "noise_hash", "n_samples", "metric",
                                      "standard_error"], rows)
    return files + ["metrics.csv"]


# -- entry point -------------------------------------------------------------------


COMMANDS = ("generate", "estimate-mcmc", "estimate-smc", "heatmap", "decode-eval")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="surfnoise", description="Noise-model estimation from "
                                "surface-code syndromes.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="TOML run configuration")
        s.add_argument("--data", help="syndrome file (estimate-*, heatmap)")
        s.add_argument("--seed", type=int, help="override the configured master seed")
        s.add_argument("--workers", type=int, help="override the configured worker count")
        s.add_argument("--out", help="output directory (default: config 'out')")
    return p


def run(argv: list[str] | None = None) -> Path:
    args = build_parser().parse_args(argv)
    started = time.time()
    cfg = load_config(args.config).with_overrides(seed=args.seed, workers=args.workers, out=args.out)
    out = Path(cfg.out)
    if args.command == "generate":
        files = cmd_generate(cfg, out)
    elif args.command == "estimate-mcmc":
        files = cmd_estimate_mcmc(cfg, out, args.data)
    elif args.command == "estimate-smc":
        files = cmd_estimate_smc(cfg, out, args.data)
    elif args.command == "heatmap":
        files = cmd_heatmap(cfg, out, args.data)
    else:
        files = cmd_decode_eval(cfg, out)
    write_manifest(out, cfg, args.command, files, started)
    return out


def main(argv: list[str] | None = None) -> int:
    try:
        out = run(argv)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
