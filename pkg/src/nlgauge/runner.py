"""Scenario execution: simulate, gauge-check, convergence, mixture-demo, sweep.

All functions are pure library entry points used by the CLI; they write
versioned CSV files plus a JSON run report into an output directory and
return the report. Outputs are deterministic for a fixed config and seed
(wall-clock time lives only in the JSON report, never in CSV).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from . import gauge as gauge_mod
from .config import ConfigError, ScenarioConfig
from .ensembles import (
    decomposition_divergence,
    default_observable_set,
    equivalent_decompositions,
)
from .evolution import (
    BlowUpError,
    Trajectory,
    conjugated_evolve,
    evolve,
    evolve_linear,
    params_from_gauge,
)
from .field import WaveFunction, make_gaussian, norm, write_snapshot
from .observables import LinearProjection, BorelBin, equivalence_table_check

__all__ = [
    "RunReport",
    "NumericalAbort",
    "simulate",
    "gauge_check",
    "convergence",
    "mixture_demo",
    "sweep",
]

CSV_SCHEMA_VERSION = "nlgauge-csv-1"
REPORT_SCHEMA_VERSION = "nlgauge-report-1"


class NumericalAbort(RuntimeError):
    """A run aborted for numerical reasons (blow-up guard, invalid values)."""


@dataclass
class RunReport:
    """Summary of one run; serialized as report JSON next to the CSV files."""

    command: str
    schema_version: str = REPORT_SCHEMA_VERSION
    config_hash: str = ""
    seed: int = 0
    metrics: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    aborted: bool = False
    abort_reason: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: str, cfg_hash: str, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {CSV_SCHEMA_VERSION} config_sha256={cfg_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _write_report(outdir: str, report: RunReport) -> str:
    path = os.path.join(outdir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    report.outputs.append(path)
    return path


def _trajectory_csv(outdir: str, name: str, cfg_hash: str, traj: Trajectory,
                    stride: int) -> str:
    rows = []
    for i, t in enumerate(traj.times):
        if stride > 1 and i % stride and i != len(traj.times) - 1:
            continue
        rows.append((t, traj.norms[i], traj.linear_energies[i], traj.max_amps[i]))
    path = os.path.join(outdir, name)
    _write_csv(path, cfg_hash, ["t", "norm", "linear_energy", "max_amp"], rows)
    return path


def _run_trajectory(cfg: ScenarioConfig, state_stride: int | None = None) -> Trajectory:
    psi0 = cfg.initial_state()
    dt = cfg.typed("integrator", "dt")
    t_final = cfg.typed("integrator", "t_final")
    family = cfg.typed("equation", "family")
    if family == "linear":
        return evolve_linear(psi0, cfg.potential(), t_final, dt,
                             cfg.typed("equation", "hbar"), cfg.typed("equation", "mass"),
                             state_stride=state_stride)
    params = cfg.unified_params()
    return evolve(psi0, params, t_final, dt, state_stride=state_stride,
                  cfl_factor=cfg.typed("integrator", "cfl_factor"))


def simulate(cfg: ScenarioConfig, outdir: str) -> RunReport:
    """Run one scenario, writing diagnostics CSV, optional snapshots, report."""
    os.makedirs(outdir, exist_ok=True)
    report = RunReport(command="simulate", config_hash=cfg.hash(),
                       seed=cfg.typed("run", "seed"))
    started = time.perf_counter()
    stride = max(1, cfg.typed("output", "stride"))
    try:
        traj = _run_trajectory(cfg, state_stride=stride)
    except (BlowUpError, FloatingPointError) as exc:
        report.aborted = True
        report.abort_reason = str(exc)
        report.wall_clock_seconds = time.perf_counter() - started
        _write_report(outdir, report)
        raise NumericalAbort(str(exc)) from exc
    report.outputs.append(
        _trajectory_csv(outdir, "diagnostics.csv", cfg.hash(), traj, 1)
    )
    if cfg.typed("output", "snapshots"):
        for t, state in traj.states:
            path = os.path.join(outdir, f"state_t{t:.6f}.gfld")
            with open(path, "wb") as fh:
                write_snapshot(state, fh)
            report.outputs.append(path)
    report.metrics = {
        "final_time": traj.final_time,
        "final_norm": traj.norms[-1],
        "norm_drift": max(abs(x - traj.norms[0]) for x in traj.norms),
        "final_linear_energy": traj.linear_energies[-1],
        "max_amplitude": max(traj.max_amps),
    }
    report.wall_clock_seconds = time.perf_counter() - started
    _write_report(outdir, report)
    return report


def _gauge_deviation(cfg: ScenarioConfig, dt: float) -> float:
    """Max relative L2 deviation direct-vs-conjugated over capture times."""
    psi0 = cfg.initial_state()
    n = cfg.gauge_transform()
    t_final = cfg.typed("integrator", "t_final")
    hbar = cfg.typed("equation", "hbar")
    mass = cfg.typed("equation", "mass")
    V = cfg.potential()
    params = params_from_gauge(n.gamma, None, hbar, mass, V, cfg.floor())
    nsteps = round(t_final / dt)
    stride = max(1, nsteps // 8)
    direct = evolve(psi0, params, t_final, dt, state_stride=stride,
                    cfl_factor=cfg.typed("integrator", "cfl_factor"))
    oracle = conjugated_evolve(psi0, n, V, t_final, dt, hbar, mass, state_stride=stride)
    dev = 0.0
    oracle_states = {round(t, 12): s for t, s in oracle.states}
    for t, s in direct.states:
        ref = oracle_states.get(round(t, 12))
        if ref is None or t == 0.0:
            continue
        scale = norm(ref)
        diff = norm(ref.with_amplitudes(ref.amplitudes - s.amplitudes))
        dev = max(dev, diff / scale)
    return dev


def gauge_check(cfg: ScenarioConfig, outdir: str, levels: int = 3) -> RunReport:
    """Gauge-equivalence check: trajectory deviation, dt slope, table rows.

    Runs the direct integration of the pushforward coefficients against
    the conjugated linear flow at ``levels`` halved time steps, reports the
    deviation at the configured dt and the convergence slope between
    successive halvings, and writes the four equivalence-table rows as
    (t, row_label, deviation) CSV.
    """
    os.makedirs(outdir, exist_ok=True)
    report = RunReport(command="gauge-check", config_hash=cfg.hash(),
                       seed=cfg.typed("run", "seed"))
    started = time.perf_counter()
    dt0 = cfg.typed("integrator", "dt")
    try:
        devs = [_gauge_deviation(cfg, dt0 / 2**i) for i in range(max(1, levels))]
    except (BlowUpError, FloatingPointError) as exc:
        report.aborted = True
        report.abort_reason = str(exc)
        _write_report(outdir, report)
        raise NumericalAbort(str(exc)) from exc
    slopes = [
        math.log2(devs[i] / devs[i + 1]) if devs[i + 1] > 0 else float("nan")
        for i in range(len(devs) - 1)
    ]

    psi0 = cfg.initial_state()
    n = cfg.gauge_transform()
    grid = psi0.grid
    proj = LinearProjection.position(BorelBin.half_space(grid))
    table = equivalence_table_check(
        psi0, n, proj, cfg.potential(), cfg.typed("integrator", "t_final"), dt0,
        cfg.typed("equation", "hbar"), cfg.typed("equation", "mass"),
        state_stride=max(1, round(cfg.typed("integrator", "t_final") / dt0) // 8),
    )
    rows = []
    for label, series in table["rows"].items():
        for t, dev in zip(table["times"], series):
            rows.append((t, label, dev))
    path = os.path.join(outdir, "equivalence_table.csv")
    _write_csv(path, cfg.hash(), ["t", "row_label", "deviation"], rows)
    report.outputs.append(path)
    report.metrics = {
        "deviation": devs[0],
        "deviations_per_level": devs,
        "dt_levels": [dt0 / 2**i for i in range(len(devs))],
        "convergence_slopes": slopes,
        "table_max_deviation": table["max_deviation"],
    }
    report.wall_clock_seconds = time.perf_counter() - started
    _write_report(outdir, report)
    return report


def convergence(cfg: ScenarioConfig, outdir: str, levels: int = 3) -> RunReport:
    """Self-convergence study: runs at dt, dt/2, ... against the finest run.

    Needs at least 3 levels to report an observed order.
    """
    if levels < 3:
        raise ConfigError("convergence needs at least 3 refinement levels")
    os.makedirs(outdir, exist_ok=True)
    report = RunReport(command="convergence", config_hash=cfg.hash(),
                       seed=cfg.typed("run", "seed"))
    started = time.perf_counter()
    dt0 = cfg.typed("integrator", "dt")
    finals = []
    dts = [dt0 / 2**i for i in range(levels + 1)]
    for dt in dts:
        level_cfg = _with_value(cfg, "integrator", "dt", repr(dt))
        traj = _run_trajectory(level_cfg, state_stride=None)
        finals.append(traj.final_state)
    ref = finals[-1]
    errors = []
    for psi in finals[:-1]:
        errors.append(norm(ref.with_amplitudes(psi.amplitudes - ref.amplitudes)) / norm(ref))
    orders = [
        math.log2(errors[i] / errors[i + 1]) if errors[i + 1] > 0 else float("nan")
        for i in range(len(errors) - 1)
    ]
    rows = [(dts[i], errors[i], orders[i - 1] if i >= 1 else float("nan"))
            for i in range(len(errors))]
    path = os.path.join(outdir, "convergence.csv")
    _write_csv(path, cfg.hash(), ["dt", "error_vs_finest", "observed_order"], rows)
    report.outputs.append(path)
    report.metrics = {
        "dt_levels": dts[:-1],
        "errors": errors,
        "observed_orders": orders,
    }
    report.wall_clock_seconds = time.perf_counter() - started
    _write_report(outdir, report)
    return report


def _with_value(cfg: ScenarioConfig, section: str, key: str, raw: str) -> ScenarioConfig:
    from .config import _coerce, _SCHEMA  # internal reuse

    new_values = {s: dict(kv) for s, kv in cfg.values.items()}
    kind = _SCHEMA[section][key][0]
    new_values[section][key] = (_coerce(kind, raw, f"{section}.{key}"), raw)
    return ScenarioConfig(new_values)


def mixture_demo(cfg: ScenarioConfig, outdir: str) -> RunReport:
    """Decomposition-divergence demonstration.

    Builds the two equivalent decompositions from the configured pair
    construction, evolves all members under the configured family, and
    writes (t, observable_id, expectation_e, expectation_eprime, abs_diff).
    """
    os.makedirs(outdir, exist_ok=True)
    report = RunReport(command="mixture-demo", config_hash=cfg.hash(),
                       seed=cfg.typed("run", "seed"))
    started = time.perf_counter()
    grid = cfg.grid()
    sigma = cfg.typed("state", "sigma")
    construction = cfg.typed("mixture", "construction")
    if construction == "disjoint":
        sep = cfg.typed("mixture", "separation")
        c1 = (-sep,) + (0.0,) * (grid.dims - 1)
        c2 = (+sep,) + (0.0,) * (grid.dims - 1)
        phi1 = make_gaussian(grid, c1, sigma)
        phi2 = make_gaussian(grid, c2, sigma)
    else:  # parity: even Gaussian and odd first-moment state, same support
        phi1 = make_gaussian(grid, (0.0,) * grid.dims, sigma)
        x0 = grid.coordinates()[0]
        amp = x0 * phi1.amplitudes
        phi2 = WaveFunction(grid, amp)
        phi2 = phi2.with_amplitudes(phi2.amplitudes / norm(phi2))
    e, e_prime = equivalent_decompositions(phi1, phi2)

    conjugator = None
    if cfg.typed("mixture", "conjugate_observables"):
        from .ensembles import Ensemble

        conjugator = cfg.gauge_transform()
        # the nonlinear description carries N[member] for each linear member
        e = Ensemble(tuple((w, gauge_mod.apply(conjugator, s)) for w, s in e.members))
        e_prime = Ensemble(tuple((w, gauge_mod.apply(conjugator, s))
                                 for w, s in e_prime.members))
    observables = default_observable_set(grid, seed=cfg.typed("run", "seed"),
                                         conjugator=conjugator)
    params = cfg.unified_params()
    dt = cfg.typed("integrator", "dt")
    t_final = cfg.typed("integrator", "t_final")
    nsteps = round(t_final / dt)
    stride = max(1, nsteps // 8)
    try:
        result = decomposition_divergence(e, e_prime, params, t_final, dt,
                                          observables, state_stride=stride)
    except (BlowUpError, FloatingPointError) as exc:
        report.aborted = True
        report.abort_reason = str(exc)
        _write_report(outdir, report)
        raise NumericalAbort(str(exc)) from exc
    path = os.path.join(outdir, "mixture.csv")
    _write_csv(path, cfg.hash(),
               ["t", "observable_id", "expectation_e", "expectation_eprime", "abs_diff"],
               result["rows"])
    report.outputs.append(path)
    report.metrics = {"divergence": result["divergence"]}
    report.wall_clock_seconds = time.perf_counter() - started
    _write_report(outdir, report)
    return report


def sweep(cfg: ScenarioConfig, outdir: str, workers: int | None = None) -> RunReport:
    """Run the scenario once per value of [sweep] key, in a worker pool.

    Row order and content are independent of the parallel schedule;
    failures are recorded per row and do not stop the sweep.
    """
    os.makedirs(outdir, exist_ok=True)
    report = RunReport(command="sweep", config_hash=cfg.hash(),
                       seed=cfg.typed("run", "seed"))
    started = time.perf_counter()
    key = cfg.typed("sweep", "key").strip()
    values_raw = cfg.typed("sweep", "values").strip()
    if not key or not values_raw:
        raise ConfigError("sweep needs sweep.key and sweep.values")
    if "." not in key:
        raise ConfigError(f"sweep.key must look like section.key, got {key!r}")
    section, subkey = key.split(".", 1)
    values = [v.strip() for v in values_raw.split(",") if v.strip()]
    if workers is None:
        workers = int(os.environ.get("NLGAUGE_WORKERS", "2"))

    def one(index_value):
        index, raw = index_value
        try:
            level_cfg = _with_value(cfg, section, subkey, raw)
            traj = _run_trajectory(level_cfg, state_stride=None)
            drift = max(abs(x - traj.norms[0]) for x in traj.norms)
            return (index, raw, "ok", traj.norms[-1], drift,
                    traj.linear_energies[-1])
        except (ConfigError, BlowUpError, FloatingPointError, ValueError) as exc:
            reason = str(exc).replace(",", ";")
            return (index, raw, f"failed: {reason}", float("nan"), float("nan"), float("nan"))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, enumerate(values)))
    results.sort(key=lambda r: r[0])
    rows = [(i, f"{key}={raw}", status, fn, drift, en)
            for i, raw, status, fn, drift, en in results]
    path = os.path.join(outdir, "sweep.csv")
    _write_csv(path, cfg.hash(),
               ["run_index", "parameter", "status", "final_norm", "norm_drift",
                "final_linear_energy"],
               rows)
    report.outputs.append(path)
    ok = [r for r in results if r[2] == "ok"]
    report.metrics = {
        "runs": len(results),
        "failures": len(results) - len(ok),
        "max_norm_drift": max((r[4] for r in ok), default=float("nan")),
    }
    report.wall_clock_seconds = time.perf_counter() - started
    _write_report(outdir, report)
    return report
