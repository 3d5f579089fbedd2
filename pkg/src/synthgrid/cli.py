"""Configuration-driven command-line pipeline.

    synthgrid <ingest|fit|generate|evaluate|hems|report> --config <path>
              [--seed N] [--force] [--runs N] ...

One JSON or TOML config describes a run; every artifact lands under the
run's output directory, and run.json records provenance (config copy,
timestamps, artifact hashes).  A single global seed fans out to per-module
seeds as seed + module ordinal, so stages stay reproducible in isolation.

Exit codes: 0 success, 2 usage/validation error, 3 refusing to overwrite
without --force.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import gmm as gmm_mod
from . import hems as hems_mod
from . import ingest as ingest_mod
from . import metrics as metrics_mod
from . import report as report_mod
from .deepgen import (
    TrainConfig,
    generate_gan,
    generate_vaegan,
    load_checkpoint,
    save_checkpoint,
    train_vaegan,
    train_vanilla_gan,
)
from .errors import OutputExistsError, ParameterError, SchemaError, SynthgridError

MODULE_ORDINALS = {
    "ingest": 0,
    "gmm": 1,
    "gan": 2,
    "vaegan": 3,
    "metrics": 4,
    "hems": 5,
    "generate": 6,
}

CHANNELS = ("load", "pv", "ev")
MODEL_NAMES = ("gmm", "gan", "vaegan")


def module_seed(global_seed: int, module: str) -> int:
    return global_seed + MODULE_ORDINALS[module]


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    raw: dict
    path: Path
    seed: int
    out_dir: Path

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))


def load_config(path, seed_override=None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"config file not found: {path}")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        raw = tomllib.loads(path.read_text())
    else:
        raw = json.loads(path.read_text())
    if "out_dir" not in raw:
        raise SchemaError("config must define out_dir")
    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)

    out_dir = Path(raw["out_dir"])
    env_root = os.environ.get("SYNTHGRID_OUT")
    if env_root:
        rel = out_dir.name if out_dir.is_absolute() else out_dir
        out_dir = Path(env_root) / rel
    return RunConfig(raw=raw, path=path, seed=seed, out_dir=out_dir)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def record_run(config: RunConfig, command: str, artifacts) -> None:
    """Append one provenance entry to <out_dir>/run.json."""
    run_path = config.out_dir / "run.json"
    entries = []
    if run_path.exists():
        entries = json.loads(run_path.read_text()).get("commands", [])
    entries.append(
        {
            "command": command,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "seed": config.seed,
            "config": config.raw,
            "artifacts": {
                str(p.relative_to(config.out_dir)): _sha256(p) for p in sorted(artifacts)
            },
        }
    )
    run_path.parent.mkdir(parents=True, exist_ok=True)
    run_path.write_text(json.dumps({"commands": entries}, indent=2, sort_keys=True) + "\n")


def _require_new_outputs(paths, force: bool):
    existing = [p for p in paths if Path(p).exists()]
    if existing and not force:
        raise OutputExistsError(
            f"outputs already exist (use --force to overwrite): {existing[0]}"
        )


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(config: RunConfig, force: bool = False) -> int:
    section = config.section("ingest")
    for key in ("load_csv", "pv_csv", "ev_sessions_csv"):
        if key not in section:
            raise SchemaError(f"ingest config missing {key!r}")
        if not Path(section[key]).exists():
            raise SchemaError(f"input path does not exist: {section[key]}")
    ratio = float(section.get("split_ratio", 0.8))
    level_kw = float(section.get("ev_level_kw", 3.6))

    data_dir = config.out_dir / "data"
    outputs = [
        data_dir / f"{ch}_{split}.csv" for ch in CHANNELS for split in ("train", "test")
    ]
    _require_new_outputs(outputs, force)

    series = {
        "load": ingest_mod.load_power_csv(section["load_csv"], channel="load"),
        "pv": ingest_mod.load_power_csv(section["pv_csv"], channel="pv"),
        "ev": ingest_mod.ev_sessions_to_load(
            ingest_mod.load_ev_sessions_csv(section["ev_sessions_csv"]), level_kw
        ),
    }
    artifacts = []
    for ch, raw in series.items():
        resampled = ingest_mod.resample_mean(raw)
        days = ingest_mod.clean_full_days(resampled)
        train, test = ingest_mod.split_train_test(days, ratio=ratio)
        train_n = ingest_mod.normalize(train)
        test_n = ingest_mod.normalize(test, record=train_n.norm)
        for split, ds in (("train", train_n), ("test", test_n)):
            csv_path = data_dir / f"{ch}_{split}.csv"
            ingest_mod.save_profile_set(ds, csv_path)
            artifacts += [csv_path, ingest_mod.sidecar_path(csv_path)]
    record_run(config, "ingest", artifacts)
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _train_set(config: RunConfig, channel: str):
    path = config.out_dir / "data" / f"{channel}_train.csv"
    if not path.exists():
        raise SchemaError(f"train split not found (run ingest first): {path}")
    return ingest_mod.load_profile_set(path)


def _deep_config(config: RunConfig, model: str, seed: int) -> TrainConfig:
    section = config.section("deepgen")
    return TrainConfig(
        latent_channels=int(section.get("latent_channels", 8)),
        hidden_channels=int(section.get("hidden_channels", 24)),
        batch_size=int(section.get("batch_size", 32)),
        epochs=int(section.get("epochs", 500)),
        learning_rate=float(section.get("learning_rate", 2e-4)),
        seed=seed,
        model_type="gan" if model == "gan" else "vaegan",
        saturating_gan=bool(section.get("saturating_gan", False)),
    )


def cmd_fit(config: RunConfig, model: str, channel: str, force: bool = False) -> int:
    if model not in MODEL_NAMES:
        raise ParameterError(f"unknown model {model!r}, expected one of {MODEL_NAMES}")
    if channel not in CHANNELS:
        raise ParameterError(f"unknown channel {channel!r}, expected one of {CHANNELS}")
    train = _train_set(config, channel)
    seed = module_seed(config.seed, model)
    artifacts = []

    if model == "gmm":
        section = config.section("gmm")
        ckpt = config.out_dir / "models" / f"gmm_{channel}.json"
        _require_new_outputs([ckpt], force)
        fitted = gmm_mod.fit_gmm(
            train,
            k=int(section.get("k", 5)),
            seed=seed,
            max_iter=int(section.get("max_iter", 200)),
            tol=float(section.get("tol", 1e-6)),
        )
        gmm_mod.save_gmm(fitted, ckpt)
        artifacts.append(ckpt)
    else:
        ckpt_dir = config.out_dir / "models" / f"{model}_{channel}"
        _require_new_outputs([ckpt_dir / "manifest.json"], force)
        train_cfg = _deep_config(config, model, seed)
        trainer = train_vanilla_gan if model == "gan" else train_vaegan
        fitted = trainer(train, train_cfg, checkpoint_dir=ckpt_dir)
        curve_path = ckpt_dir / "losses.csv"
        keys = sorted(fitted.history)
        lines = [",".join(["epoch"] + keys)]
        for e in range(fitted.epoch):
            lines.append(",".join([str(e)] + [repr(fitted.history[k][e]) for k in keys]))
        curve_path.write_text("\n".join(lines) + "\n")
        artifacts += [ckpt_dir / "weights.bin", ckpt_dir / "manifest.json", curve_path]
    record_run(config, f"fit:{model}:{channel}", artifacts)
    return 0


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _load_any_checkpoint(config: RunConfig, model: str, channel: str, checkpoint=None):
    if checkpoint is not None:
        path = Path(checkpoint)
    elif model == "gmm":
        path = config.out_dir / "models" / f"gmm_{channel}.json"
    else:
        path = config.out_dir / "models" / f"{model}_{channel}"
    if not path.exists():
        raise SchemaError(f"checkpoint not found (run fit first): {path}")
    if path.is_dir():
        return load_checkpoint(path)
    return gmm_mod.load_gmm(path)


def _default_n_days(config: RunConfig, channel: str) -> int:
    test_path = config.out_dir / "data" / f"{channel}_test.csv"
    if test_path.exists():
        return ingest_mod.load_profile_set(test_path).n_days
    raise SchemaError("cannot infer --n-days without an ingested test split; pass --n-days")


def cmd_generate(
    config: RunConfig,
    model: str,
    channel: str,
    n_days: int | None = None,
    checkpoint=None,
    force: bool = False,
) -> int:
    if model not in MODEL_NAMES:
        raise ParameterError(f"unknown model {model!r}")
    if channel not in CHANNELS:
        raise ParameterError(f"unknown channel {channel!r}")
    fitted = _load_any_checkpoint(config, model, channel, checkpoint)
    n = int(n_days) if n_days else _default_n_days(config, channel)
    seed = module_seed(config.seed, "generate")

    out_csv = config.out_dir / "synth" / model / f"{channel}.csv"
    _require_new_outputs([out_csv], force)

    if isinstance(fitted, gmm_mod.GmmModel):
        synth = gmm_mod.sample_gmm(fitted, n, seed=seed)
    elif fitted.kind == "gan":
        synth = generate_gan(fitted, n, seed=seed)
    else:
        synth = generate_vaegan(fitted, n, seed=seed)
    # Persist denormalized watts, same format ingest emits.
    synth_raw = ingest_mod.denormalize(synth) if synth.normalized else synth
    ingest_mod.save_profile_set(synth_raw, out_csv)
    record_run(config, f"generate:{model}:{channel}", [out_csv, ingest_mod.sidecar_path(out_csv)])
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(
    config: RunConfig,
    model: str,
    channel: str,
    real_csv=None,
    synth_csv=None,
    force: bool = False,
) -> int:
    real_path = Path(real_csv) if real_csv else config.out_dir / "data" / f"{channel}_test.csv"
    synth_path = Path(synth_csv) if synth_csv else config.out_dir / "synth" / model / f"{channel}.csv"
    for p in (real_path, synth_path):
        if not p.exists():
            raise SchemaError(f"input not found: {p}")
    out_path = config.out_dir / "reports" / f"{model}_{channel}.json"
    _require_new_outputs([out_path], force)

    section = config.section("metrics")
    mcfg = metrics_mod.MetricsConfig(
        bins=int(section.get("bins", 50)),
        sigma=section.get("sigma"),
    )
    real = ingest_mod.load_profile_set(real_path)
    synth = ingest_mod.load_profile_set(synth_path)
    rep = metrics_mod.evaluate_generator(real, synth, mcfg, model_name=model)
    metrics_mod.save_report(rep, out_path)
    print(
        f"{model}/{channel}: kl={rep.kl:.6g} nats, wasserstein={rep.wasserstein:.6g}, "
        f"mmd={rep.mmd:.6g}"
    )
    record_run(config, f"evaluate:{model}:{channel}", [out_path])
    return 0


# ---------------------------------------------------------------------------
# hems
# ---------------------------------------------------------------------------

def _hems_config(config: RunConfig) -> hems_mod.HemsConfig:
    section = config.section("hems")
    prices = hems_mod.PriceSchedule.two_tier_default()
    if section.get("price_schedule"):
        prices = hems_mod.PriceSchedule.from_json(section["price_schedule"])
    kwargs = {
        key: section[key]
        for key in (
            "p_ch_kw",
            "capacity_kwh",
            "soc_min",
            "soc_max",
            "soc_init",
            "alpha",
            "gamma_d",
            "epsilon",
            "epsilon_decay",
            "episodes",
            "soc_bins",
            "pv_bins",
            "load_bins",
            "time_bins",
        )
        if key in section
    }
    return hems_mod.HemsConfig(prices=prices, **kwargs)


def _scenario_sets(directory: Path, split: str | None):
    """Load the three channel day-matrix CSVs from a scenario directory."""
    sets = {}
    for ch in CHANNELS:
        candidates = [directory / f"{ch}.csv"]
        if split:
            candidates.insert(0, directory / f"{ch}_{split}.csv")
        path = next((p for p in candidates if p.exists()), None)
        if path is None:
            raise SchemaError(f"missing channel file for {ch!r} in {directory}")
        sets[ch] = ingest_mod.load_profile_set(path)
    return sets


def cmd_hems(
    config: RunConfig,
    model: str,
    runs: int = 10,
    train_data=None,
    test_data=None,
    force: bool = False,
) -> int:
    if runs < 1:
        raise ParameterError("--runs must be >= 1")
    train_dir = Path(train_data) if train_data else config.out_dir / "synth" / model
    test_dir = Path(test_data) if test_data else config.out_dir / "data"
    for d in (train_dir, test_dir):
        if not d.exists():
            raise SchemaError(f"data directory not found: {d}")
    synthetic = _scenario_sets(train_dir, split=None)
    real = _scenario_sets(test_dir, split="test")

    out_dir = config.out_dir / "hems" / model
    episodes_csv = out_dir / "episodes.csv"
    daily_csv = out_dir / "daily_profit.csv"
    qtable_bin = out_dir / "qtable.bin"
    _require_new_outputs([episodes_csv, daily_csv, qtable_bin], force)

    hcfg = _hems_config(config)
    base_seed = module_seed(config.seed, "hems")
    curves, dailies, qtables = [], [], []
    for i in range(runs):
        qtable, curve = hems_mod.train_offline(synthetic, hcfg, seed=base_seed + i)
        logs = hems_mod.test_online(qtable, real)
        curves.append(curve)
        dailies.append([log.cumulative_profit for log in logs])
        qtables.append(qtable)

    run_cols = [f"run_{base_seed + i}" for i in range(runs)]
    lines = [",".join(["episode"] + run_cols + ["mean"])]
    for e in range(len(curves[0])):
        vals = [curve[e] for curve in curves]
        lines.append(",".join([str(e)] + [repr(float(v)) for v in vals] + [repr(float(np.mean(vals)))]))
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes_csv.write_text("\n".join(lines) + "\n")

    daily = np.asarray(dailies)          # (runs, days)
    lines = [",".join(["day"] + run_cols + ["mean"])]
    for d in range(daily.shape[1]):
        lines.append(
            ",".join([str(d)] + [repr(float(v)) for v in daily[:, d]] + [repr(float(daily[:, d].mean()))])
        )
    totals = daily.sum(axis=1)
    lines.append(
        ",".join(["total"] + [repr(float(v)) for v in totals] + [repr(float(totals.mean()))])
    )
    daily_csv.write_text("\n".join(lines) + "\n")

    hems_mod.save_qtable(qtables[0], qtable_bin)
    print(f"hems[{model}]: mean total profit over {runs} run(s) = {totals.mean():.6g}")
    record_run(
        config,
        f"hems:{model}",
        [episodes_csv, daily_csv, qtable_bin, qtable_bin.with_suffix(".json")],
    )
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(config: RunConfig, force: bool = False) -> int:
    reports_dir = config.out_dir / "reports"
    report_files = sorted(reports_dir.glob("*.json")) if reports_dir.exists() else []
    if not report_files:
        raise SchemaError(f"no distance reports found under {reports_dir}")
    reports = [metrics_mod.load_report(p) for p in report_files]

    hems_totals = {}
    hems_root = config.out_dir / "hems"
    if hems_root.exists():
        for daily_csv in sorted(hems_root.glob("*/daily_profit.csv")):
            model = daily_csv.parent.name
            last = daily_csv.read_text().strip().splitlines()[-1].split(",")
            if last[0] == "total":
                hems_totals[model] = float(last[-1])

    out_dir = config.out_dir / "report"
    table_csv = out_dir / "comparison_table.csv"
    _require_new_outputs([table_csv], force)
    header, rows = report_mod.build_comparison_table(reports, hems_totals)
    report_mod.write_table_csv(header, rows, table_csv)
    artifacts = [table_csv]

    # Overlay + profile plots for every model/channel with data on disk.
    for rep in reports:
        model, ch = rep["model"], rep["channel"]
        real_path = config.out_dir / "data" / f"{ch}_test.csv"
        synth_path = config.out_dir / "synth" / model / f"{ch}.csv"
        if not (real_path.exists() and synth_path.exists()):
            continue
        real = ingest_mod.load_profile_set(real_path)
        synth = ingest_mod.load_profile_set(synth_path)
        overlay = out_dir / f"pdf_overlay_{model}_{ch}.png"
        profile = out_dir / f"profiles_{model}_{ch}.png"
        report_mod.plot_pdf_overlay(real, synth, f"{model} / {ch}", overlay, bins=rep["histogram_bins"])
        report_mod.plot_profile_sample(real, synth, f"{model} / {ch}", profile)
        artifacts += [overlay, profile]

    print(f"report: {len(rows)} model row(s) -> {table_csv}")
    record_run(config, "report", artifacts)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthgrid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON or TOML run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    common(sub.add_parser("ingest", help="load, clean, split, and normalize the raw data"))

    p_fit = sub.add_parser("fit", help="train one generative model on one channel")
    common(p_fit)
    p_fit.add_argument("--model", required=True)
    p_fit.add_argument("--channel", required=True)

    p_gen = sub.add_parser("generate", help="sample synthetic days from a checkpoint")
    common(p_gen)
    p_gen.add_argument("--model", required=True)
    p_gen.add_argument("--channel", required=True)
    p_gen.add_argument("--n-days", type=int, default=None)
    p_gen.add_argument("--checkpoint", default=None)

    p_eval = sub.add_parser("evaluate", help="distance metrics between real and synthetic data")
    common(p_eval)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--channel", required=True)
    p_eval.add_argument("--real", default=None)
    p_eval.add_argument("--synth", default=None)

    p_hems = sub.add_parser("hems", help="offline-train and online-test the Q-learning HEMS")
    common(p_hems)
    p_hems.add_argument("--model", required=True, help="which model's synthetic data to train on")
    p_hems.add_argument("--runs", type=int, default=10)
    p_hems.add_argument("--train-data", default=None, help="directory with load/pv/ev day CSVs")
    p_hems.add_argument("--test-data", default=None)

    common(sub.add_parser("report", help="aggregate reports and profits into one table + plots"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, seed_override=args.seed)
        if args.command == "ingest":
            return cmd_ingest(config, force=args.force)
        if args.command == "fit":
            return cmd_fit(config, args.model, args.channel, force=args.force)
        if args.command == "generate":
            return cmd_generate(
                config,
                args.model,
                args.channel,
                n_days=args.n_days,
                checkpoint=args.checkpoint,
                force=args.force,
            )
        if args.command == "evaluate":
            return cmd_evaluate(
                config,
                args.model,
                args.channel,
                real_csv=args.real,
                synth_csv=args.synth,
                force=args.force,
            )
        if args.command == "hems":
            return cmd_hems(
                config,
                args.model,
                runs=args.runs,
                train_data=args.train_data,
                test_data=args.test_data,
                force=args.force,
            )
        if args.command == "report":
            return cmd_report(config, force=args.force)
        parser.error(f"unknown command {args.command!r}")
    except OutputExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SynthgridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
