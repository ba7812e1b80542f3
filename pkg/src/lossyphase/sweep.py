"""Parameter sweeps, run configuration and delimited table I/O.

Config files are flat ``key = value`` text. ``#`` starts a comment. A value is
a scalar (``0.2``, ``1/8``, ``true``), a comma-separated list
(``1/2, 1/8``) or a range axis ``start:stop:points[:log]``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import estimator, fock
from . import gaussian as ga
from .errors import ConfigError, CutoffError

COMMANDS = ("fig4", "fig5", "fig6", "compare", "measure")
MODES = ("analytic", "oracle", "compare", "measurement")
DEFAULT_MODE = {"fig4": "analytic", "fig5": "analytic", "fig6": "analytic",
                "compare": "compare", "measure": "measurement"}
MAX_RANGE_AXES = 2

DEFAULT_PARAMS = {
    "fig4": {"n_loss": "0:2:41", "mu": "1/2, 1/8, 1/32, 1/128", "n_total": "10"},
    "fig5": {"n_loss": "0:2:41", "n_total": "10"},
    "fig6": {"n_loss": "0:2:41"},
    "compare": {"alpha": "0.5, 1.0", "r": "0.3, 0.6, 1.0", "sigma": "0, 0.1, 0.3"},
    "measure": {"alpha": "1", "r": "1", "sigma": "0.2", "phi": "0", "transmittance": "none"},
}
PARAM_KEYS = {
    "fig4": {"n_loss", "mu", "n_total"},
    "fig5": {"n_loss", "n_total"},
    "fig6": {"n_loss"},
    "compare": {"alpha", "r", "sigma"},
    "measure": {"alpha", "r", "sigma", "phi", "transmittance"},
}
SETTING_KEYS = {"mode", "truncation_budget", "cutoff_cap", "tolerance", "format",
                "out", "ideal_squeezing", "plot", "jobs"}


@dataclass(frozen=True)
class Axis:
    """Range axis with ``points`` samples, linear or logarithmic."""

    start: float
    stop: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.points < 1:
            raise ConfigError("an axis needs at least one point")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"unknown axis scale {self.scale!r}")
        if self.scale == "log" and not (self.start > 0 and self.stop > 0):
            raise ConfigError("log axes need positive bounds")

    def values(self) -> tuple[float, ...]:
        if self.scale == "log":
            vals = np.logspace(math.log10(self.start), math.log10(self.stop), self.points)
        else:
            vals = np.linspace(self.start, self.stop, self.points)
        return tuple(float(v) for v in vals)


@dataclass(frozen=True)
class RunConfig:
    command: str
    mode: str
    params: dict[str, Any]
    truncation_budget: float = fock.DEFAULT_BUDGET
    cutoff_cap: int = 100
    tolerance: float = 1e-4
    format: str = "csv"
    out: str | None = None
    ideal_squeezing: bool = False
    plot: str | None = None
    jobs: int = 1

    def values(self, key: str) -> tuple:
        v = self.params[key]
        return v.values() if isinstance(v, Axis) else v

    @property
    def delimiter(self) -> str:
        return "," if self.format == "csv" else "\t"


@dataclass
class SweepRecord:
    """One oracle or measurement row; optional fields stay ``None`` when not computed."""

    alpha: float
    r: float
    sigma: float
    n_total: float
    mu: float
    n_loss: float
    f_analytic: float
    enhancement: float
    f_oracle: float | None = None
    rel_dev: float | None = None
    sld_residual: float | None = None
    estimator_residual: float | None = None
    estimator_sensitivity: float | None = None
    sensitivity_measurement: float | None = None
    tail_mass: float | None = None
    d1: int | None = None
    d2: int | None = None
    extra: dict = field(default_factory=dict)
    status: str = "ok"


@dataclass
class Table:
    columns: list[str]
    rows: list[list]

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [row[j] for row in self.rows]

    def to_text(self, delimiter: str = ",") -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_format_cell(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, delimiter: str = ",") -> "Table":
        reader = csv.reader(io.StringIO(text), delimiter=delimiter)
        columns = next(reader)
        return cls(columns, [[_parse_cell(c) for c in row] for row in reader])

    def __eq__(self, other):
        if not isinstance(other, Table) or self.columns != other.columns:
            return False
        return len(self.rows) == len(other.rows) and all(
            list(a) == list(b) for a, b in zip(self.rows, other.rows)
        )


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


# -- config parsing -------------------------------------------------------


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_value(text: str):
    """Parse a parameter value into an :class:`Axis` or a tuple of values."""
    text = text.strip()
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) not in (3, 4):
            raise ConfigError(f"axis must be start:stop:points[:log], got {text!r}")
        try:
            points = int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"axis point count must be an integer: {text!r}") from exc
        scale = parts[3] if len(parts) == 4 else "linear"
        if scale == "lin":
            scale = "linear"
        return Axis(_number(parts[0]), _number(parts[1]), points, scale)
    items = [p for p in (s.strip() for s in text.split(",")) if p]
    if not items:
        raise ConfigError("empty value")
    return tuple(None if p.lower() == "none" else _number(p) for p in items)


def read_config_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` pairs; later assignments win."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def build_config(command: str, raw: dict[str, str]) -> RunConfig:
    """Merge defaults with ``raw`` settings and validate the result."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    merged = dict(DEFAULT_PARAMS[command])
    merged.update(raw)
    allowed = PARAM_KEYS[command] | SETTING_KEYS
    unknown = sorted(set(merged) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(unknown)}")

    params = {k: parse_value(merged[k]) for k in PARAM_KEYS[command] if k in merged}
    settings: dict[str, Any] = {}
    try:
        if "truncation_budget" in merged:
            settings["truncation_budget"] = _number(merged["truncation_budget"])
        if "cutoff_cap" in merged:
            settings["cutoff_cap"] = int(merged["cutoff_cap"])
        if "tolerance" in merged:
            settings["tolerance"] = _number(merged["tolerance"])
        if "jobs" in merged:
            settings["jobs"] = int(merged["jobs"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "format" in merged:
        settings["format"] = merged["format"].strip().lower()
    for key in ("out", "plot"):
        if merged.get(key):
            settings[key] = merged[key].strip()
    if "ideal_squeezing" in merged:
        settings["ideal_squeezing"] = _bool(merged["ideal_squeezing"])
    mode = merged.get("mode", DEFAULT_MODE[command]).strip()

    config = RunConfig(command=command, mode=mode, params=params, **settings)
    validate_config(config)
    return config


def validate_config(config: RunConfig) -> None:
    if config.mode not in MODES:
        raise ConfigError(f"unknown mode {config.mode!r}")
    allowed_modes = {"compare": {"compare", "oracle"}, "measure": {"measurement"}}
    if config.mode not in allowed_modes.get(config.command, {"analytic"}):
        raise ConfigError(f"mode {config.mode!r} does not apply to {config.command}")
    if config.format not in ("csv", "tsv"):
        raise ConfigError(f"format must be csv or tsv, got {config.format!r}")
    if not config.truncation_budget > 0:
        raise ConfigError("truncation_budget must be > 0")
    if config.cutoff_cap < 2:
        raise ConfigError("cutoff_cap must be >= 2")
    if not config.tolerance > 0:
        raise ConfigError("tolerance must be > 0")
    if config.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    axes = [k for k, v in config.params.items() if isinstance(v, Axis)]
    if len(axes) > MAX_RANGE_AXES:
        raise ConfigError(f"at most {MAX_RANGE_AXES} range axes per run, got {axes}")

    def check(key, ok, what):
        if key in config.params:
            for v in config.values(key):
                if v is None or not ok(v):
                    raise ConfigError(f"{key}={v!r}: {what}")

    check("n_loss", lambda v: v >= 0, "must be >= 0")
    check("mu", lambda v: 0 < v < 1, "must lie in (0, 1)")
    check("n_total", lambda v: v > 0, "must be > 0")
    check("alpha", lambda v: v >= 0, "must be >= 0")
    check("r", lambda v: v >= 0, "must be >= 0")
    check("sigma", lambda v: 0 <= v < 1, "must lie in [0, 1)")
    check("phi", lambda v: abs(v) <= 0.5, "phase must be small (|phi| <= 0.5)")
    if "transmittance" in config.params:
        for v in config.values("transmittance"):
            if v is not None and not 0 < v < 1:
                raise ConfigError(f"transmittance={v!r}: must be none or lie in (0, 1)")
    if {"alpha", "r"} <= set(config.params):
        if 0.0 in config.values("alpha") and 0.0 in config.values("r"):
            raise ConfigError("alpha = r = 0 carries no photons")


def load_config(command: str, path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    raw = read_config_text(Path(path).read_text()) if path else {}
    raw.update(overrides or {})
    return build_config(command, raw)


# -- figure tables --------------------------------------------------------


def _mu_label(mu: float) -> str:
    return format(mu, ".6g")


def _budget_fisher(n_total, mu, n_loss, ideal):
    budget = ga.BudgetSpec(n_total, mu, n_loss)
    if ideal:
        return ga.fisher_budget(budget, ideal_squeezing=True)
    return ga.fisher_budget(budget, ga.consistent_squeezing(budget))


def run_fig4(n_loss_axis: Iterable[float], mu_list: Sequence[float], n_total: float = 10.0,
             ideal_squeezing: bool = False) -> Table:
    """Enhancement against photons lost, one column per squeezing fraction.

    ``fisher[...]`` columns give the Fisher information at photon number
    ``n_total``, exact in ``r`` unless ``ideal_squeezing`` is set.
    """
    columns = ["n_loss", "N", "sigma"]
    columns += [f"enhancement[mu={_mu_label(mu)}]" for mu in mu_list]
    columns += [f"fisher[mu={_mu_label(mu)}]" for mu in mu_list]
    rows = []
    for n_loss in n_loss_axis:
        row = [n_loss, n_total, n_loss / (n_total + n_loss)]
        row += [ga.enhancement(mu, n_loss) for mu in mu_list]
        row += [_budget_fisher(n_total, mu, n_loss, ideal_squeezing) for mu in mu_list]
        rows.append(row)
    return Table(columns, rows)


def run_fig5(n_loss_axis: Iterable[float], n_total: float = 10.0, ideal_squeezing: bool = False) -> Table:
    """Enhancement at the optimal squeezing fraction next to the ``mu = 1/2`` value."""
    columns = ["n_loss", "N", "sigma", "mu_opt", "enhancement_opt", "enhancement_half",
               "fisher_opt", "fisher_half"]
    rows = []
    for n_loss in n_loss_axis:
        mu_opt = ga.optimal_squeezing_fraction(n_loss)
        rows.append([
            n_loss, n_total, n_loss / (n_total + n_loss), mu_opt,
            ga.enhancement_at_optimum(n_loss), ga.enhancement(0.5, n_loss),
            _budget_fisher(n_total, mu_opt, n_loss, ideal_squeezing),
            _budget_fisher(n_total, 0.5, n_loss, ideal_squeezing),
        ])
    return Table(columns, rows)


def run_fig6(n_loss_axis: Iterable[float]) -> Table:
    columns = ["n_loss", "mu_opt", "improvement_ratio", "enhancement_opt", "enhancement_half"]
    rows = [
        [n, ga.optimal_squeezing_fraction(n), ga.improvement_ratio(n),
         ga.enhancement_at_optimum(n), ga.enhancement(0.5, n)]
        for n in n_loss_axis
    ]
    return Table(columns, rows)


# -- oracle and measurement tables ---------------------------------------

COMPARE_COLUMNS = [
    "alpha", "r", "sigma", "N", "mu", "n_loss", "d1", "d2", "tail_mass",
    "F_analytic", "enhancement", "F_oracle", "rel_dev", "estimator_sensitivity",
    "sld_residual", "estimator_residual", "status",
]
MEASURE_COLUMNS = [
    "alpha", "r", "sigma", "N", "mu", "n_loss", "phi", "transmittance", "displacement",
    "d1", "d2", "tail_mass", "mean", "variance", "slope", "sensitivity_measurement",
    "matrix_mean", "matrix_variance", "sensitivity_direct", "F_analytic", "rel_dev", "status",
]


def _base_record(alpha, r, sigma) -> SweepRecord:
    spec = ga.InputSpec(alpha, r, sigma)
    budget = ga.budget_from_input(spec)
    return SweepRecord(
        alpha=alpha, r=r, sigma=sigma, n_total=budget.n_total, mu=budget.mu,
        n_loss=budget.n_loss, f_analytic=ga.fisher_information(spec),
        enhancement=ga.enhancement(budget.mu, budget.n_loss),
    )


def compare_point(point: tuple[float, float, float], budget: float, cutoff_cap: int, tolerance: float) -> SweepRecord:
    """Oracle versus closed form at one ``(alpha, r, sigma)``."""
    rec = _base_record(*point)
    spec = ga.InputSpec(*point)
    try:
        report, residual = estimator.oracle_report(spec, budget, cutoff_cap)
    except CutoffError:
        rec.status = "infeasible"
        return rec
    rec.f_oracle = report.qfi
    rec.rel_dev = abs(report.qfi - rec.f_analytic) / rec.f_analytic
    rec.sld_residual = report.sld_residual
    rec.estimator_residual = residual
    rec.estimator_sensitivity = report.estimator_sensitivity
    rec.tail_mass = report.tail_mass
    rec.d1, rec.d2 = report.dims
    if rec.rel_dev > tolerance:
        rec.status = "tolerance"
    return rec


def measure_point(point: tuple[float, ...], budget: float, cutoff_cap: int, tolerance: float) -> SweepRecord:
    """Operational measurement at one ``(alpha, r, sigma, phi, transmittance)``."""
    alpha, r, sigma, phi, transmittance = point
    rec = _base_record(alpha, r, sigma)
    spec = ga.InputSpec(alpha, r, sigma)
    try:
        state = fock.lossy_input_state(spec, budget, cutoff_cap)
    except CutoffError:
        rec.status = "infeasible"
        rec.extra.update(phi=phi, transmittance=transmittance)
        return rec
    est = estimator.EstimatorSpec.from_input(spec, state.dims)
    setup = estimator.MeasurementSetup.for_estimator(est, transmittance)
    result = estimator.simulate_measurement(setup, state, phi)
    # same readout without the local oscillator: plain photon counting behind the interferometer
    direct = estimator.simulate_measurement(estimator.MeasurementSetup(0.0), state, phi)
    padded = fock.pad(state, 1)
    shifted = fock.phase_shifted(padded, fock.generator_h(padded.dims), phi)
    g = estimator.optimal_estimator(estimator.EstimatorSpec.from_input(spec, padded.dims))
    matrix = estimator.estimator_moments(shifted, g, fock.generator_h(padded.dims))
    rec.sensitivity_measurement = result.sensitivity
    rec.rel_dev = abs(result.sensitivity - rec.f_analytic) / rec.f_analytic
    rec.tail_mass = state.tail_mass
    rec.d1, rec.d2 = state.dims
    rec.extra.update(
        phi=phi, transmittance=transmittance, displacement=setup.displacement,
        mean=result.mean, variance=result.variance, slope=result.slope,
        matrix_mean=matrix.mean, matrix_variance=matrix.variance,
        sensitivity_direct=direct.sensitivity,
    )
    if transmittance is None and rec.rel_dev > tolerance:
        rec.status = "tolerance"
    return rec


def _record_row(rec: SweepRecord, columns: Sequence[str]) -> list:
    source = {
        "alpha": rec.alpha, "r": rec.r, "sigma": rec.sigma, "N": rec.n_total, "mu": rec.mu,
        "n_loss": rec.n_loss, "d1": rec.d1, "d2": rec.d2, "tail_mass": rec.tail_mass,
        "F_analytic": rec.f_analytic, "enhancement": rec.enhancement, "F_oracle": rec.f_oracle,
        "rel_dev": rec.rel_dev, "estimator_sensitivity": rec.estimator_sensitivity,
        "sld_residual": rec.sld_residual, "estimator_residual": rec.estimator_residual,
        "sensitivity_measurement": rec.sensitivity_measurement, "status": rec.status,
    }
    source.update(rec.extra)
    return [source.get(c) for c in columns]


def _map(fn: Callable, items: list, jobs: int) -> list:
    # results come back in input order whatever the completion order
    if jobs <= 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*items)))


def _grid(config: RunConfig, keys: Sequence[str]) -> list[tuple]:
    grids = np.meshgrid(*[np.arange(len(config.values(k))) for k in keys], indexing="ij")
    out = []
    for idx in zip(*(g.ravel() for g in grids)):
        out.append(tuple(config.values(k)[i] for k, i in zip(keys, idx)))
    return out


def run_compare(points: Sequence[tuple[float, float, float]], budget: float = fock.DEFAULT_BUDGET,
                cutoff_cap: int = 100, tolerance: float = 1e-4, jobs: int = 1) -> tuple[Table, list[SweepRecord]]:
    """Closed form against the Fock oracle over ``(alpha, r, sigma)`` points."""
    items = [(tuple(p), budget, cutoff_cap, tolerance) for p in points]
    records = _map(compare_point, items, jobs)
    return Table(list(COMPARE_COLUMNS), [_record_row(r, COMPARE_COLUMNS) for r in records]), records


def run_measure(points: Sequence[tuple], budget: float = fock.DEFAULT_BUDGET, cutoff_cap: int = 100,
                tolerance: float = 1e-4, jobs: int = 1) -> tuple[Table, list[SweepRecord]]:
    items = [(tuple(p), budget, cutoff_cap, tolerance) for p in points]
    records = _map(measure_point, items, jobs)
    return Table(list(MEASURE_COLUMNS), [_record_row(r, MEASURE_COLUMNS) for r in records]), records


def execute(config: RunConfig) -> tuple[Table, bool]:
    """Run a configuration; returns the table and whether any tolerance check failed."""
    c = config.command
    if c == "fig4":
        return run_fig4(config.values("n_loss"), config.values("mu"), config.values("n_total")[0],
                        config.ideal_squeezing), False
    if c == "fig5":
        return run_fig5(config.values("n_loss"), config.values("n_total")[0], config.ideal_squeezing), False
    if c == "fig6":
        return run_fig6(config.values("n_loss")), False
    if c == "compare":
        table, records = run_compare(_grid(config, ("alpha", "r", "sigma")), config.truncation_budget,
                                     config.cutoff_cap, config.tolerance, config.jobs)
        failed = config.mode == "compare" and any(r.status == "tolerance" for r in records)
        return table, failed
    table, _ = run_measure(_grid(config, ("alpha", "r", "sigma", "phi", "transmittance")),
                           config.truncation_budget, config.cutoff_cap, config.tolerance, config.jobs)
    return table, False


# -- validation on load ---------------------------------------------------

_COLUMN_CHECKS: dict[str, Callable[[float], bool]] = {
    "n_loss": lambda v: v >= 0,
    "N": lambda v: v >= 0,
    "mu": lambda v: 0 <= v <= 1,
    "mu_opt": lambda v: 0 < v <= 0.5,
    "sigma": lambda v: 0 <= v < 1,
    "alpha": lambda v: v >= 0,
    "r": lambda v: v >= 0,
    "tail_mass": lambda v: v >= 0,
    "enhancement": lambda v: 0 <= v <= 1,
    "enhancement_opt": lambda v: 0 <= v <= 1,
    "enhancement_half": lambda v: 0 <= v <= 1,
    "improvement_ratio": lambda v: 1 - 1e-12 <= v < 2,
}


def validate_table(table: Table) -> None:
    """Spot-check each row against the domain invariants of its columns."""
    for i, row in enumerate(table.rows):
        cells = dict(zip(table.columns, row))
        for name, value in cells.items():
            if value is None or isinstance(value, str):
                continue
            check = _COLUMN_CHECKS.get(name)
            if check is None and name.startswith("enhancement["):
                check = _COLUMN_CHECKS["enhancement"]
            if check is not None and not check(value):
                raise ValueError(f"row {i}: {name}={value!r} violates its domain")
        if cells.get("F_analytic") is not None and cells.get("N") is not None:
            if cells["F_analytic"] < cells["N"] * (1 - 1e-12):
                raise ValueError(f"row {i}: F_analytic below the shot-noise value N")
        eo, eh = cells.get("enhancement_opt"), cells.get("enhancement_half")
        if eo is not None and eh is not None and eo < eh * (1 - 1e-12):
            raise ValueError(f"row {i}: optimized enhancement below the mu = 1/2 value")


def write_table(table: Table, path: str | Path | None, delimiter: str = ",") -> str:
    text = table.to_text(delimiter)
    if path is not None:
        Path(path).write_text(text, newline="")
    return text


def load_table(path: str | Path, delimiter: str | None = None) -> Table:
    """Read an emitted table and validate every row."""
    path = Path(path)
    if delimiter is None:
        delimiter = "\t" if path.suffix == ".tsv" else ","
    table = Table.from_text(path.read_text(), delimiter)
    validate_table(table)
    return table
