"""Command-line entry point for the experiment studies.

Subcommands: ``gaussian``, ``regression``, ``shift``, ``spam``,
``lemma-check``. Every flag can also be supplied through a YAML config file
(a flat key: value mapping using the flag names with underscores);
explicit command-line flags override the file. Each run writes the metrics
CSV, a JSON manifest recording seed/config/version, and, unless
``--no-figures`` is given, PNG figures next to the CSV.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import yaml

from ..weights import parse_weight_spec
from .figures import render_lemma_histogram, render_metrics
from .reporting import emit_csv, write_manifest
from .spambase import synthesize_spambase_like
from .streams import StreamSpec
from .studies import (
    default_g,
    default_h,
    run_gaussian_study,
    run_lemma_check,
    run_regression_study,
    run_shift_study,
    run_spam_study,
)

_COMMON = {
    "alpha": 0.1, "delta": 0.1, "eta": 2.0, "seed": 0, "stride": 100,
    "workers": 1, "out": None, "h_weights": None, "g_weights": None,
    "figures": True,
}

_STUDY_DEFAULTS = {
    "gaussian": {"horizon": 100_000, "reps": 100, "holdout": 100,
                 "methods": "split,cs,tuc,tupac"},
    "regression": {"horizon": 50_000, "reps": 5, "dim": 10, "noise": 1.0,
                   "methods": "split,cs,tuc,tupac"},
    "shift": {"horizon": 100_000, "reps": 50, "method": "tuc",
              "shift_at": None, "no_shift": False,
              "post_mean": 1.0, "post_sigma": 1.0},
    "spam": {"data": None, "synthetic": False, "lr": 0.1, "passes": 10,
             "methods": "split,cs,tuc,tupac", "h_weights": "lognormal mu=6 sigma=1",
             "g_weights": f"lognormal mu={math.log(8.0):.12g} sigma=1"},
    "lemma-check": {"lemma": 1, "horizon": 20_000, "reps": 200},
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None,
                        help="YAML file of flag defaults; explicit flags override it")
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--eta", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--stride", type=int, default=None,
                        help="log/evaluate every this many steps")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes for replications")
    parser.add_argument("--out", type=str, default=None,
                        help="output prefix (default runs/<study>)")
    parser.add_argument("--h-weights", dest="h_weights", type=str, default=None,
                        help='step budget PMF, e.g. "lognormal mu=11 sigma=1"')
    parser.add_argument("--g-weights", dest="g_weights", type=str, default=None,
                        help='epoch budget PMF, e.g. "lognormal mu=2.77 sigma=1"')
    parser.add_argument("--figures", dest="figures", action="store_true", default=None)
    parser.add_argument("--no-figures", dest="figures", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tuconform",
        description="Anytime-valid conformal/PAC prediction-set experiments")
    sub = parser.add_subparsers(dest="study", required=True)

    p = sub.add_parser("gaussian", help="location study with exact content")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--holdout", type=int, default=None)
    p.add_argument("--methods", type=str, default=None)

    p = sub.add_parser("regression", help="linear-model residual study")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=None, help="size of each third")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--methods", type=str, default=None)

    p = sub.add_parser("shift", help="online study through a location shift")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--method", type=str, default=None, choices=("tuc", "tupac"))
    p.add_argument("--shift-at", dest="shift_at", type=int, default=None)
    p.add_argument("--no-shift", dest="no_shift", action="store_true", default=None)
    p.add_argument("--post-mean", dest="post_mean", type=float, default=None)
    p.add_argument("--post-sigma", dest="post_sigma", type=float, default=None)

    p = sub.add_parser("spam", help="spam-detection study (split and online)")
    _add_common(p)
    p.add_argument("--data", type=str, default=None,
                   help="path to a spambase-format CSV (57 features + label)")
    p.add_argument("--synthetic", action="store_true", default=None,
                   help="use a synthetic same-shape dataset instead of --data")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--passes", type=int, default=None)
    p.add_argument("--methods", type=str, default=None)

    p = sub.add_parser("lemma-check", help="Monte Carlo checks of the coverage lemmas")
    _add_common(p)
    p.add_argument("--lemma", type=int, default=None, choices=(1, 2, 3, 4))
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)

    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    study = args.study
    cfg = dict(_COMMON)
    cfg.update(_STUDY_DEFAULTS[study])
    if args.config:
        loaded = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise SystemExit(f"config file {args.config} must hold a mapping")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise SystemExit(f"unknown config keys for {study}: {sorted(unknown)}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("study", "config") or value is None:
            continue
        cfg[key] = value
    cfg["study"] = study
    if cfg.get("out") is None:
        cfg["out"] = f"runs/{study.replace('-', '_')}"
    return cfg


def _weights(cfg: dict, key: str, fallback):
    spec = cfg.get(key)
    return parse_weight_spec(spec) if spec else fallback()


def _methods(cfg: dict) -> tuple[str, ...]:
    return tuple(m.strip() for m in str(cfg["methods"]).split(",") if m.strip())


def _finish(metrics, cfg: dict, notes: tuple[str, ...] = ()) -> None:
    out = Path(cfg["out"])
    csv_path = emit_csv(metrics, out.with_suffix(".csv"))
    manifest = write_manifest(out.parent / (out.name + ".manifest.json"),
                              {**cfg, **metrics.config}, notes)
    written = [csv_path, manifest]
    if cfg["figures"]:
        written += render_metrics(metrics, out.parent, out.name)
    for method in metrics.methods():
        mean, sd = metrics.min_content_summary(method)
        print(f"{metrics.study} {method}: min content mean {mean:.4f} (sd {sd:.4f})")
    for path in written:
        print(f"wrote {path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _resolve(args)
    study = cfg.pop("study")
    if study == "gaussian":
        spec = StreamSpec("gaussian-location", cfg["horizon"], cfg["reps"], cfg["seed"],
                          {"holdout": cfg["holdout"]})
        metrics = run_gaussian_study(
            spec, _methods(cfg), alpha=cfg["alpha"], delta=cfg["delta"],
            h=_weights(cfg, "h_weights", default_h), stride=cfg["stride"],
            workers=cfg["workers"])
        _finish(metrics, cfg)
    elif study == "regression":
        spec = StreamSpec("linear-regression", cfg["horizon"], cfg["reps"], cfg["seed"],
                          {"dim": cfg["dim"], "noise": cfg["noise"]})
        metrics = run_regression_study(
            spec, _methods(cfg), alpha=cfg["alpha"], delta=cfg["delta"],
            h=_weights(cfg, "h_weights", default_h), stride=cfg["stride"],
            workers=cfg["workers"])
        print(f"oracle width: {metrics.extras['oracle_width']:.4f}")
        _finish(metrics, cfg)
    elif study == "shift":
        shift_at = None if cfg.get("no_shift") else (cfg["shift_at"] or cfg["horizon"] // 2)
        spec = StreamSpec("location-shift", cfg["horizon"], cfg["reps"], cfg["seed"],
                          {"shift_at": shift_at, "post_mean": cfg["post_mean"],
                           "post_sigma": cfg["post_sigma"]})
        metrics = run_shift_study(
            spec, alpha=cfg["alpha"], delta=cfg["delta"], method=cfg["method"],
            h=_weights(cfg, "h_weights", default_h),
            g=_weights(cfg, "g_weights", default_g),
            eta=cfg["eta"], stride=cfg["stride"], workers=cfg["workers"])
        _finish(metrics, cfg)
    elif study == "spam":
        if cfg.get("synthetic"):
            data = synthesize_spambase_like(seed=cfg["seed"])
            path = "<synthetic>"
            notes = ("synthetic same-shape stand-in for the spambase file",)
        elif cfg.get("data"):
            data, path, notes = None, cfg["data"], ()
        else:
            raise SystemExit("spam study requires --data PATH or --synthetic")
        metrics = run_spam_study(
            path, _methods(cfg), alpha=cfg["alpha"], delta=cfg["delta"],
            h=_weights(cfg, "h_weights",
                       lambda: parse_weight_spec("lognormal mu=6 sigma=1")),
            g=_weights(cfg, "g_weights",
                       lambda: parse_weight_spec(f"lognormal mu={math.log(8.0):.12g} sigma=1")),
            eta=cfg["eta"], seed=cfg["seed"], stride=cfg["stride"],
            lr=cfg["lr"], passes=cfg["passes"], data=data)
        _finish(metrics, cfg, notes)
    elif study == "lemma-check":
        report = run_lemma_check(
            cfg["lemma"], alpha=cfg["alpha"], delta=cfg["delta"],
            horizon=cfg["horizon"], reps=cfg["reps"], seed=cfg["seed"],
            h=_weights(cfg, "h_weights", default_h),
            g=_weights(cfg, "g_weights", default_g),
            eta=cfg["eta"], workers=cfg["workers"])
        print(report.describe())
        out = Path(cfg["out"])
        manifest = write_manifest(
            out.parent / (out.name + ".manifest.json"),
            {**cfg, "estimate": report.estimate, "stderr": report.stderr,
             "bound": report.bound, "passed": report.passed})
        print(f"wrote {manifest}")
        if cfg["figures"]:
            fig = render_lemma_histogram(report.mins, report.bound,
                                         out.parent / (out.name + "_minima.png"))
            print(f"wrote {fig}")
        return 0 if report.passed else 1
    else:  # pragma: no cover
        raise SystemExit(f"unknown study {study!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
