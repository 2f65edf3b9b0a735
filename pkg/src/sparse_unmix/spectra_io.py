"""Endmember-library CSV, config files and the CSV/JSON outputs.

Library file grammar (UTF-8 text, comma separated, no quoting)::

    wavelength,<name_1>,...,<name_R>
    <wl_1>,<refl_1_1>,...,<refl_1_R>
    ...

At least two data rows, strictly increasing wavelengths (micrometers),
reflectances finite and within [0, 1]. Trailing blank lines are ignored.

Config files are flat ``key = value`` lines; values are JSON literals
(``beta = 0.5``, ``true_a = [0.3, 0.7, 0, 0, 0, 0]``). ``#`` starts a comment.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Any

import numpy as np

from .experiment import ExperimentResult, SyntheticScenario
from .model import DomainError, EndmemberLibrary, PriorHyperparams
from .sampler import PROPOSALS, Chain, Histogram, SamplerConfig

BUNDLED_LIBRARY = "library.csv"


class LibraryFormatError(ValueError):
    """Malformed library text; ``line`` is 1-based."""

    def __init__(self, message: str, line: int, column: int | None = None):
        loc = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{loc}: {message}")
        self.line = line
        self.column = column


class LibraryValidationError(LibraryFormatError):
    """Well-formed text whose values break the library invariants."""


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_library(text: str) -> EndmemberLibrary:
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise LibraryFormatError("empty library file", 1)

    header = [f.strip() for f in lines[0].split(",")]
    if header[0].lower() != "wavelength":
        raise LibraryFormatError("header must start with 'wavelength'", 1, 1)
    names = header[1:]
    if len(names) < 2:
        raise LibraryFormatError("header must name at least two endmembers", 1)
    for col, name in enumerate(names, start=2):
        if not name:
            raise LibraryFormatError("empty endmember name", 1, col)
    if len(set(names)) != len(names):
        raise LibraryFormatError("duplicate endmember names", 1)

    wavelengths, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise LibraryFormatError(f"expected {len(header)} fields, found {len(fields)}", lineno)
        values = []
        for col, field in enumerate(fields, start=1):
            try:
                v = float(field)
            except ValueError:
                raise LibraryFormatError(f"not a number: {field.strip()!r}", lineno, col) from None
            if not math.isfinite(v):
                raise LibraryValidationError(f"non-finite value {field.strip()!r}", lineno, col)
            if col > 1 and not 0.0 <= v <= 1.0:
                raise LibraryValidationError(f"reflectance {v!r} outside [0, 1]", lineno, col)
            values.append(v)
        if wavelengths and values[0] <= wavelengths[-1]:
            raise LibraryValidationError(
                f"wavelength {values[0]!r} does not exceed previous {wavelengths[-1]!r}", lineno, 1
            )
        wavelengths.append(values[0])
        rows.append(values[1:])

    if len(rows) < 2:
        raise LibraryValidationError("need at least two data rows", len(lines))
    return EndmemberLibrary(wavelengths=np.array(wavelengths), spectra=np.array(rows), names=tuple(names))


def write_library(lib: EndmemberLibrary) -> str:
    out = io.StringIO()
    out.write(",".join(["wavelength", *lib.names]) + "\n")
    for wl, row in zip(lib.wavelengths, lib.spectra):
        out.write(",".join(repr(float(v)) for v in (wl, *row)) + "\n")
    return out.getvalue()


def read_library(path) -> EndmemberLibrary:
    with open(path, encoding="utf-8") as fh:
        return parse_library(fh.read())


def bundled_library() -> EndmemberLibrary:
    """The packaged 224-band, 6-endmember synthetic library."""
    text = resources.files("sparse_unmix.data").joinpath(BUNDLED_LIBRARY).read_text(encoding="utf-8")
    return parse_library(text)


def synthetic_library(n_bands: int = 224) -> EndmemberLibrary:
    """Deterministically rebuild the bundled library.

    Each spectrum is a smooth curve (a random cosine series with
    ``1/k`` amplitude decay on the 0.4-2.5 um range) rescaled into
    [0.1, 0.9].
    """
    wl = np.linspace(0.4, 2.5, n_bands)
    t = (wl - wl[0]) / (wl[-1] - wl[0])
    rng = np.random.default_rng(LIBRARY_SEED)
    columns = []
    for _ in range(6):
        f = np.zeros(n_bands)
        for k in range(1, LIBRARY_TERMS + 1):
            f += rng.normal() / k * np.cos(np.pi * k * t + rng.uniform(0.0, 2.0 * np.pi))
        f = (f - f.min()) / (f.max() - f.min())
        columns.append(0.1 + 0.8 * f)
    return EndmemberLibrary(wavelengths=wl, spectra=np.column_stack(columns), names=LIBRARY_NAMES)


LIBRARY_SEED = 0
LIBRARY_TERMS = 6
LIBRARY_NAMES = ("em1", "em2", "em3", "em4", "em5", "em6")


# -- config -----------------------------------------------------------------


@dataclass(frozen=True)
class _Key:
    kind: str
    check: Any = None
    help: str = ""


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


CONFIG_KEYS: dict[str, _Key] = {
    "beta": _Key("float", _positive, "Dirichlet concentration (0.5 sparse, 1 uniform)"),
    "gamma": _Key("float", _positive, "inverse-gamma shape of the sigma_b2 hyperprior"),
    "nu": _Key("float", _positive, "inverse-gamma scale of the sigma_b2 hyperprior"),
    "n_iter": _Key("int", _positive, "total sweeps per chain"),
    "burn_in": _Key("int", _nonneg, "sweeps discarded before summaries"),
    "n_runs": _Key("int", _positive, "independent runs in an experiment"),
    "noise_sigma": _Key("float", _nonneg, "synthetic noise standard deviation"),
    "seed": _Key("int", _nonneg, "base seed; run k uses seed + k"),
    "true_a": _Key("vector", None, "abundances used to synthesize pixels"),
    "true_b": _Key("float", None, "nonlinearity used to synthesize pixels"),
    "proposal": _Key("str", lambda v: v in PROPOSALS, "abundance move: logratio or additive"),
    "proposal_step": _Key("float", _positive, "initial random-walk step"),
    "adapt": _Key("bool", None, "adapt the step during burn-in"),
    "target_accept": _Key("float", lambda v: 0 < v < 1, "adaptation target acceptance"),
}

CONFIG_DEFAULTS: dict[str, Any] = {
    "beta": 0.5,
    "gamma": 1.0,
    "nu": 0.01,
    "n_iter": 10000,
    "burn_in": 1000,
    "n_runs": 20,
    "noise_sigma": 0.05,
    "seed": 0,
    "true_a": [0.3, 0.7, 0.0, 0.0, 0.0, 0.0],
    "true_b": 0.2,
    "proposal": "logratio",
    "proposal_step": 0.05,
    "adapt": True,
    "target_accept": 0.3,
}


def _coerce(key: str, value):
    rule = CONFIG_KEYS[key]
    if rule.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
    elif rule.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite")
    elif rule.kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
    elif rule.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a quoted string, got {value!r}")
    elif rule.kind == "vector":
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(key, f"expected a list of numbers, got {value!r}")
        value = [float(v) for v in value]
    if rule.check is not None and not rule.check(value):
        raise ConfigError(key, f"value {value!r} out of range ({rule.help})")
    return value


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines into a dict of checked values (no defaults)."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rhs = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        if key not in CONFIG_KEYS:
            raise ConfigError(key, f"unknown key (known: {', '.join(CONFIG_KEYS)})")
        if key in values:
            raise ConfigError(key, f"set twice (line {lineno})")
        try:
            value = json.loads(rhs.strip())
        except json.JSONDecodeError:
            raise ConfigError(key, f"cannot parse value {rhs.strip()!r}") from None
        values[key] = _coerce(key, value)
    return values


def build_config(
    values: dict[str, Any], library: EndmemberLibrary | None = None
) -> tuple[SyntheticScenario, SamplerConfig]:
    """Merge ``values`` over the defaults and build the scenario and sampler config."""
    for key, value in values.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        values = {**values, key: _coerce(key, value)}
    v = {**CONFIG_DEFAULTS, **values}
    if not v["burn_in"] < v["n_iter"]:
        raise ConfigError("burn_in", f"must be smaller than n_iter ({v['n_iter']})")
    lib = library if library is not None else bundled_library()
    if len(v["true_a"]) != lib.n_endmembers:
        raise ConfigError(
            "true_a", f"has {len(v['true_a'])} entries but the library has {lib.n_endmembers} endmembers"
        )
    try:
        hyper = PriorHyperparams(beta=v["beta"], gamma=v["gamma"], nu=v["nu"])
        config = SamplerConfig(
            n_iter=v["n_iter"],
            burn_in=v["burn_in"],
            hyper=hyper,
            proposal=v["proposal"],
            proposal_step=v["proposal_step"],
            adapt=v["adapt"],
            target_accept=v["target_accept"],
            seed=v["seed"],
        )
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from exc
    try:
        scenario = SyntheticScenario(
            library=lib,
            true_a=np.array(v["true_a"]),
            true_b=v["true_b"],
            noise_sigma=v["noise_sigma"],
            n_runs=v["n_runs"],
            seed=v["seed"],
        )
    except DomainError as exc:
        raise ConfigError("true_a", str(exc)) from exc
    return scenario, config


def load_config(text: str = "", library: EndmemberLibrary | None = None) -> tuple[SyntheticScenario, SamplerConfig]:
    return build_config(parse_config_text(text), library)


# -- pixels and outputs -----------------------------------------------------


def write_pixel(y, lib: EndmemberLibrary) -> str:
    out = io.StringIO()
    out.write("band,wavelength,reflectance\n")
    for i, (wl, v) in enumerate(zip(lib.wavelengths, y), start=1):
        out.write(f"{i},{float(wl)!r},{float(v)!r}\n")
    return out.getvalue()


def parse_pixel(text: str) -> np.ndarray:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if any(f.strip() for f in r)]
    if not rows or [f.strip() for f in rows[0]] != ["band", "wavelength", "reflectance"]:
        raise LibraryFormatError("pixel header must be 'band,wavelength,reflectance'", 1)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise LibraryFormatError(f"expected 3 fields, found {len(row)}", lineno)
        try:
            v = float(row[2])
        except ValueError:
            raise LibraryFormatError(f"not a number: {row[2]!r}", lineno, 3) from None
        if not math.isfinite(v):
            raise LibraryValidationError("non-finite reflectance", lineno, 3)
        values.append(v)
    if not values:
        raise LibraryFormatError("pixel file has no data rows", 1)
    return np.array(values)


def histogram_csv(hist: Histogram) -> str:
    out = io.StringIO()
    out.write("bin_left,bin_right,count\n")
    for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
        out.write(f"{float(lo)!r},{float(hi)!r},{int(c)}\n")
    return out.getvalue()


def trace_csv(chain: Chain) -> str:
    n_members = chain.a.shape[1]
    out = io.StringIO()
    cols = ["iteration", *(f"a_{r}" for r in range(1, n_members + 1)), "b", "sigma2", "sigma_b2"]
    out.write(",".join(cols) + "\n")
    for i in range(len(chain)):
        vals = [*chain.a[i], chain.b[i], chain.sigma2[i], chain.sigma_b2[i]]
        out.write(f"{i}," + ",".join(repr(float(v)) for v in vals) + "\n")
    return out.getvalue()


def dumps(doc: dict) -> str:
    """Stable JSON text (sorted keys, fixed indent) for byte-identical reports."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def experiment_summary(result: ExperimentResult) -> dict:
    return {
        "mse": result.mse,
        "re": result.re,
        "per_run": [
            {
                "run": k,
                "a": [float(v) for v in est.a],
                "b": est.b,
                "sigma2": est.sigma2,
                "sigma_b2": est.sigma_b2,
                "acceptance_rate": rate,
            }
            for k, (est, rate) in enumerate(zip(result.per_run_estimates, result.acceptance_rates))
        ],
    }
