"""Scenario configuration: parsing, schema validation, hashing.

Configs are line-oriented INI text with nested sections, for example::

    [grid]
    points = 256
    lengths = 40.0

    [state]
    kind = gaussian
    sigma = 1.0

    [equation]
    family = gauge

    [gauge]
    gamma = 1.0

    [integrator]
    dt = 2e-4
    t_final = 0.5

Every key is validated against the schema below; unknown sections or keys
are rejected with the offending name. Scalar values may be numeric
literals or expressions in ``t`` (coefficients) / in ``x, y, z``
(potential, theta, kappa fields), evaluated with numpy functions in
scope. The resolved config embeds, with defaults applied, into a
canonical text whose SHA-256 is stamped on every output.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .field import Grid, WaveFunction, make_gaussian, make_plane_wave, read_snapshot
from .functionals import DensityFloor
from .gauge import GaugeTransform
from .paths import ScalarPath

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "parse_config", "config_hash"]

SCHEMA_VERSION = "nlgauge-config-1"

_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh,
    "abs": np.abs, "pi": math.pi, "e": math.e,
}


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries section/key context."""


def _eval_expression(expr: str, **variables):
    try:
        return eval(expr, {"__builtins__": {}}, {**_EXPR_NAMES, **variables})
    except Exception as exc:
        raise ConfigError(f"cannot evaluate expression {expr!r}: {exc}") from exc


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        try:
            value = _eval_expression(raw)
        except ConfigError as exc:
            raise ConfigError(f"{where}: expected a number, got {raw!r}") from exc
        if not np.isscalar(value):
            raise ConfigError(f"{where}: expected a scalar, got {raw!r}")
        return float(value)


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}")


def _parse_floats(raw: str, where: str) -> tuple[float, ...]:
    return tuple(_parse_float(tok, where) for tok in raw.split())


def _parse_ints(raw: str, where: str) -> tuple[int, ...]:
    return tuple(_parse_int(tok, where) for tok in raw.split())


def _parse_bool(raw: str, where: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


# section -> key -> (kind, default-as-string or None for required/optional)
_SCHEMA: dict = {
    "grid": {
        "points": ("ints", "256"),
        "lengths": ("floats", "40.0"),
    },
    "state": {
        "kind": ("choice:gaussian,plane_wave,file", "gaussian"),
        "center": ("floats", "0.0"),
        "sigma": ("float", "1.0"),
        "momentum": ("floats", "0.0"),
        "file": ("str", ""),
    },
    "equation": {
        "family": ("choice:linear,bbm,dg,gauge,unified,haag_bannier", "linear"),
        "hbar": ("float", "1.0"),
        "mass": ("float", "1.0"),
        "alpha1": ("scalar_expr", "0.0"),
        "D": ("float", "0.0"),
        "Dprime": ("float", "1.0"),
        "c": ("floats", "0 0 0 0 0"),
        "A": ("field_expr", ""),
        "nu1": ("scalar_expr", ""),
        "nu2": ("scalar_expr", ""),
        "mu1": ("scalar_expr", ""),
        "mu2": ("scalar_expr", ""),
        "mu3": ("scalar_expr", ""),
        "mu4": ("scalar_expr", ""),
        "mu5": ("scalar_expr", ""),
        "potential": ("field_expr", ""),
        "floor": ("float", "1e-12"),
    },
    "gauge": {
        "gamma": ("scalar_expr", "0.0"),
        "gamma_dot": ("scalar_expr", ""),
        "lambda": ("int", "1"),
        "theta": ("field_expr", ""),
        "kappa": ("field_expr", ""),
    },
    "integrator": {
        "dt": ("float", "1e-3"),
        "t_final": ("float", "1.0"),
        "cfl_factor": ("float", "0.2"),
    },
    "output": {
        "stride": ("int", "1"),
        "snapshots": ("bool", "false"),
    },
    "run": {
        "seed": ("int", "0"),
    },
    "mixture": {
        "construction": ("choice:disjoint,parity", "disjoint"),
        "separation": ("float", "7.0"),
        "conjugate_observables": ("bool", "false"),
    },
    "sweep": {
        "key": ("str", ""),
        "values": ("str", ""),
    },
}


@dataclass
class ScenarioConfig:
    """A validated scenario: raw values plus constructed objects on demand."""

    values: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[section][key]

    def raw(self, section: str, key: str) -> str:
        return self.values[section][key][1]

    def typed(self, section: str, key: str):
        return self.values[section][key][0]

    # -- constructed objects -------------------------------------------------

    def grid(self) -> Grid:
        points = self.typed("grid", "points")
        lengths = self.typed("grid", "lengths")
        if len(lengths) == 1 and len(points) > 1:
            lengths = lengths * len(points)
        try:
            return Grid(points, lengths)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def initial_state(self) -> WaveFunction:
        grid = self.grid()
        kind = self.typed("state", "kind")
        if kind == "gaussian":
            center = _broadcast(self.typed("state", "center"), grid.dims)
            momentum = _broadcast(self.typed("state", "momentum"), grid.dims)
            try:
                return make_gaussian(grid, center, self.typed("state", "sigma"), momentum)
            except ValueError as exc:
                raise ConfigError(f"state: {exc}") from exc
        if kind == "plane_wave":
            momentum = _broadcast(self.typed("state", "momentum"), grid.dims)
            return make_plane_wave(grid, momentum)
        path = self.typed("state", "file")
        if not path:
            raise ConfigError("state: kind=file requires state.file")
        with open(path, "rb") as fh:
            psi = read_snapshot(fh)
        if psi.grid != grid:
            raise ConfigError("state: snapshot grid does not match [grid]")
        return psi

    def floor(self) -> DensityFloor:
        try:
            return DensityFloor(self.typed("equation", "floor"))
        except ValueError as exc:
            raise ConfigError(f"equation.floor: {exc}") from exc

    def potential(self):
        expr = self.raw("equation", "potential")
        if not expr.strip():
            return None
        grid = self.grid()
        coords = dict(zip("xyz", grid.coordinates()))
        value = _eval_expression(expr, **coords)
        return np.broadcast_to(np.asarray(value, dtype=float), grid.shape).copy()

    def coefficient(self, key: str, default=None):
        """A scalar coefficient: float, or expression in t -> ScalarPath."""
        raw = self.raw("equation", key) if key in _SCHEMA["equation"] else ""
        return _scalar_or_path(raw, default)

    def gauge_transform(self) -> GaugeTransform:
        gamma = _scalar_or_path(self.raw("gauge", "gamma"), 0.0)
        gdot_raw = self.raw("gauge", "gamma_dot").strip()
        if gdot_raw:
            gdot = _scalar_or_path(gdot_raw, 0.0)
            base = gamma if isinstance(gamma, ScalarPath) else ScalarPath(gamma)
            gamma = ScalarPath(base.value, gdot if not isinstance(gdot, ScalarPath) else gdot.value)
        lam = self.typed("gauge", "lambda")
        grid = self.grid()
        theta = _field_or_none(self.raw("gauge", "theta"), grid)
        kappa = _field_or_none(self.raw("gauge", "kappa"), grid)
        try:
            return GaugeTransform(gamma=gamma, lam=lam, kappa=kappa, theta=theta,
                                  floor=self.floor())
        except ValueError as exc:
            raise ConfigError(f"gauge: {exc}") from exc

    def unified_params(self):
        """Build UnifiedParams for [equation] (import-cycle-free helper)."""
        from .evolution import (
            params_from_BBM,
            params_from_DG,
            params_from_gauge,
            params_from_haag_bannier,
            params_from_linear,
        )

        family = self.typed("equation", "family")
        hbar = self.typed("equation", "hbar")
        mass = self.typed("equation", "mass")
        V = self.potential()
        floor = self.floor()
        if family == "linear":
            from dataclasses import replace

            return replace(params_from_linear(hbar, mass, V), floor=floor)
        if family == "bbm":
            return params_from_BBM(self.coefficient("alpha1", 0.0), hbar, mass, V, floor)
        if family == "dg":
            return params_from_DG(self.typed("equation", "D"),
                                  self.typed("equation", "Dprime"),
                                  self.typed("equation", "c"), hbar, mass, V, floor)
        if family == "gauge":
            n = self.gauge_transform()
            return params_from_gauge(n.gamma, None, hbar, mass, V, floor)
        if family == "haag_bannier":
            grid = self.grid()
            expr = self.raw("equation", "A").strip()
            if not expr:
                raise ConfigError("equation.A required for family=haag_bannier")
            comps = []
            coords = dict(zip("xyz", grid.coordinates()))
            for comp_expr in expr.split(";"):
                value = _eval_expression(comp_expr.strip(), **coords)
                comps.append(np.broadcast_to(np.asarray(value, float), grid.shape).copy())
            if len(comps) != grid.dims:
                raise ConfigError("equation.A needs one ';'-separated component per axis")
            return params_from_haag_bannier(tuple(comps), hbar, mass, V, floor)
        # unified: explicit coefficients, defaulting to the linear point
        base = params_from_linear(hbar, mass, V)
        from dataclasses import replace

        updates = {"floor": floor}
        for key in ("nu1", "nu2", "mu1", "mu2", "mu3", "mu4", "mu5", "alpha1"):
            raw = self.raw("equation", key).strip()
            if raw:
                updates[key] = _scalar_or_path(raw, 0.0)
        return replace(base, **updates)

    def canonical_text(self) -> str:
        lines = [f"# {SCHEMA_VERSION}"]
        for section in sorted(self.values):
            for key in sorted(self.values[section]):
                lines.append(f"{section}.{key} = {self.values[section][key][1]}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def _broadcast(values: tuple, dims: int) -> tuple:
    if len(values) == 1:
        return values * dims
    if len(values) != dims:
        raise ConfigError(f"expected 1 or {dims} components, got {len(values)}")
    return values


def _scalar_or_path(raw: str, default):
    raw = (raw or "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        pass
    if "t" not in raw:
        value = _eval_expression(raw)
        return float(value)
    value_fn = lambda t: float(_eval_expression(raw, t=t))
    return ScalarPath(value_fn)


def _field_or_none(raw: str, grid: Grid):
    raw = (raw or "").strip()
    if not raw:
        return None
    if raw.endswith(".gfld"):
        with open(raw, "rb") as fh:
            snap = read_snapshot(fh)
        if snap.grid != grid:
            raise ConfigError(f"field file {raw}: grid mismatch")
        return np.real(snap.amplitudes)
    coords = dict(zip("xyz", grid.coordinates()))
    value = _eval_expression(raw, **coords)
    return np.broadcast_to(np.asarray(value, dtype=float), grid.shape).copy()


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate config text; raise :class:`ConfigError` on any issue."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (D, Dprime, A)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc

    values: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")

    for section, keys in _SCHEMA.items():
        values[section] = {}
        for key, (kind, default) in keys.items():
            if parser.has_option(section, key):
                raw = parser.get(section, key).strip()
            else:
                raw = default
            where = f"{section}.{key}"
            values[section][key] = (_coerce(kind, raw, where), raw)
    return ScenarioConfig(values)


def _coerce(kind: str, raw: str, where: str):
    if kind == "float":
        return _parse_float(raw, where)
    if kind == "int":
        return _parse_int(raw, where)
    if kind == "floats":
        return _parse_floats(raw, where)
    if kind == "ints":
        return _parse_ints(raw, where)
    if kind == "bool":
        return _parse_bool(raw, where)
    if kind == "str":
        return raw
    if kind in ("scalar_expr", "field_expr"):
        return raw
    if kind.startswith("choice:"):
        choices = kind.split(":", 1)[1].split(",")
        if raw not in choices:
            raise ConfigError(f"{where}: must be one of {choices}, got {raw!r}")
        return raw
    raise AssertionError(f"unhandled schema kind {kind}")


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_hash(cfg: ScenarioConfig) -> str:
    return cfg.hash()
