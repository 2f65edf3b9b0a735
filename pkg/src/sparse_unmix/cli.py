"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input parse/validation error,
3 runtime numerical error, 4 pixel/library size mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment, model, spectra_io
from .sampler import PROPOSALS, SamplerError, posterior_histogram, posterior_mean, run_chain

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_MISMATCH = 4

QUICK = {"n_runs": 5, "n_iter": 2000, "burn_in": 1000}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message, EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser, *, runs: bool = False):
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--iters", type=int, dest="n_iter")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--proposal", choices=PROPOSALS, help="abundance move (default: logratio)")
    if runs:
        p.add_argument("--runs", type=int, dest="n_runs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-unmix", description="Sparse-Dirichlet PPNMM unmixing by MCMC.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic mixed pixel")
    p.add_argument("--library", type=Path, help="library CSV (default: bundled)")
    p.add_argument("-o", "--output", type=Path, required=True, help="pixel CSV to write")
    _add_common(p)

    p = sub.add_parser("unmix", help="sample the posterior for one pixel")
    p.add_argument("pixel", type=Path)
    p.add_argument("--library", type=Path, help="library CSV (default: bundled)")
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    p.add_argument("--trace", action="store_true", help="also write the full chain as trace.csv")
    p.add_argument("--bins", type=int, default=experiment.HIST_BINS)
    _add_common(p)

    p = sub.add_parser("reproduce", help="rerun the synthetic two-prior comparison")
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    p.add_argument("--quick", action="store_true", help="5 runs x 2000 sweeps")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _add_common(p, runs=True)

    p = sub.add_parser("validate-library", help="check a library CSV")
    p.add_argument("library", type=Path)
    return parser


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from exc


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_INPUT) from exc


def _library(path: Path | None) -> model.EndmemberLibrary:
    if path is None:
        return spectra_io.bundled_library()
    try:
        return spectra_io.parse_library(_read_text(path))
    except (spectra_io.LibraryFormatError, model.DomainError, model.DimensionError) as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from exc


def _settings(args, library, extra: dict | None = None):
    values = {}
    if args.config is not None:
        values = spectra_io.parse_config_text(_read_text(args.config))
    values.update(extra or {})
    for key in ("seed", "beta", "n_iter", "burn_in", "noise_sigma", "n_runs", "proposal"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return spectra_io.build_config(values, library)


def cmd_synth(args) -> int:
    lib = _library(args.library)
    scenario, _ = _settings(args, lib)
    y = experiment.generate_pixel(scenario, scenario.pixel_rng(0))
    _write(args.output, spectra_io.write_pixel(y, lib))
    provenance = {
        "true_a": [float(v) for v in scenario.true_a],
        "true_b": scenario.true_b,
        "noise_sigma": scenario.noise_sigma,
        "seed": scenario.seed,
        "library": str(args.library) if args.library else "bundled",
        "n_bands": lib.n_bands,
    }
    _write(args.output.with_name(args.output.name + ".provenance.json"), spectra_io.dumps(provenance))
    return EXIT_OK


def cmd_unmix(args) -> int:
    lib = _library(args.library)
    try:
        y = spectra_io.parse_pixel(_read_text(args.pixel))
    except spectra_io.LibraryFormatError as exc:
        raise CliError(f"{args.pixel}: {exc}", EXIT_INPUT) from exc
    if y.size != lib.n_bands:
        raise CliError(f"pixel has {y.size} bands but library has {lib.n_bands}", EXIT_MISMATCH)
    _, config = _settings(args, lib)
    chain = run_chain(y, lib, config)
    est = posterior_mean(chain, config.burn_in)
    out = args.output_dir
    summary = {
        "posterior_mean": {
            "a": dict(zip(lib.names, (float(v) for v in est.a))),
            "b": est.b,
            "sigma2": est.sigma2,
            "sigma_b2": est.sigma_b2,
        },
        "acceptance_rate": chain.acceptance_rate_after(config.burn_in),
        "final_step": chain.final_step.tolist(),
        "provenance": {
            "pixel": str(args.pixel),
            "library": str(args.library) if args.library else "bundled",
            "beta": config.hyper.beta,
            "gamma": config.hyper.gamma,
            "nu": config.hyper.nu,
            "n_iter": config.n_iter,
            "burn_in": config.burn_in,
            "seed": config.seed,
            "proposal": config.proposal,
        },
    }
    _write(out / "summary.json", spectra_io.dumps(summary))
    components = [f"a{r}" for r in range(1, lib.n_endmembers + 1)] + ["b"]
    for comp in components:
        hist = posterior_histogram(chain, comp, config.burn_in, args.bins)
        _write(out / f"hist_{comp}.csv", spectra_io.histogram_csv(hist))
    if args.trace:
        _write(out / "trace.csv", spectra_io.trace_csv(chain))
    return EXIT_OK


def _table(results: dict[str, experiment.ExperimentResult]) -> str:
    lines = ["Estimation and reconstruction errors (x 1e-2)", "", f"{'prior':<12}{'beta':>6}{'MSE':>10}{'RE':>10}"]
    for label, res in results.items():
        lines.append(f"{label:<12}{res.beta:>6g}{res.mse * 100:>10.4f}{res.re * 100:>10.2f}")
    lines.append("")
    lines.append(f"{'prior':<12}{'mean a1':>10}{'mean a2':>10}{'mean a3':>10}{'mean b':>10}{'accept':>8}")
    for label, res in results.items():
        a = np.mean([e.a for e in res.per_run_estimates], axis=0)
        b = np.mean([e.b for e in res.per_run_estimates])
        acc = np.mean(res.acceptance_rates)
        lines.append(f"{label:<12}{a[0]:>10.4f}{a[1]:>10.4f}{a[2]:>10.4f}{b:>10.4f}{acc:>8.3f}")
    return "\n".join(lines) + "\n"


def cmd_reproduce(args) -> int:
    lib = spectra_io.bundled_library()
    scenario, config = _settings(args, lib, dict(QUICK) if args.quick else None)
    jobs = max(1, args.jobs)
    results = {
        "sparse": experiment.run_experiment(scenario, config, jobs=jobs),
        "uniform": experiment.run_experiment(scenario, config, baseline=True, jobs=jobs),
    }
    out = args.output_dir
    report = {
        "settings": {
            "n_runs": scenario.n_runs,
            "n_iter": config.n_iter,
            "burn_in": config.burn_in,
            "noise_sigma": scenario.noise_sigma,
            "seed": scenario.seed,
            "true_a": [float(v) for v in scenario.true_a],
            "true_b": scenario.true_b,
            "gamma": config.hyper.gamma,
            "nu": config.hyper.nu,
            "proposal": config.proposal,
            "quick": bool(args.quick),
        },
        "results": {
            label: {"beta": res.beta, "mse_x1e2": res.mse * 100, "re_x1e2": res.re * 100,
                    **spectra_io.experiment_summary(res), "posterior_sd": res.posterior_sd}
            for label, res in results.items()
        },
    }
    _write(out / "report.json", spectra_io.dumps(report))
    _write(out / "report.txt", _table(results))
    for label, res in results.items():
        for comp, hist in res.histograms.items():
            _write(out / f"hist_{label}_{comp}.csv", spectra_io.histogram_csv(hist))
    sys.stdout.write(_table(results))
    return EXIT_OK


def cmd_validate_library(args) -> int:
    lib = _library(args.library)
    print(f"ok: {lib.n_bands} bands, {lib.n_endmembers} endmembers ({', '.join(lib.names)})")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "unmix": cmd_unmix,
    "reproduce": cmd_reproduce,
    "validate-library": cmd_validate_library,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except spectra_io.ConfigError as exc:
        print(f"error: config {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SamplerError, model.DomainError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
