"""Run configuration: TOML text -> validated :class:`RunConfig`.

Minimal file (everything else takes its default)::

    [material]
    horizon = 0.1

    [domain]
    bounds = [[0.0, 1.0], [0.0, 1.0]]
    spacing = 0.025
    collar_thickness = 0.25

    [dynamics]
    t_end = 1.0

Validation never stops at the first problem: :func:`parse_config` raises a
:class:`ConfigError` listing every violation, each prefixed with the dotted
key it concerns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import tomli

from .calibration import MaterialModel, fit_kernel
from .diagnostics import ProcessZoneParams
from .dynamics import BodyForce
from .grid import DomainSpec
from .kernel import CohesivePotential, InfluenceFunction

PROFILES = ("exponential", "rational", "table")
INFLUENCES = ("constant", "conical", "table")
BODY_FORCES = ("none", "constant", "ramped", "plane_wave")
INITIAL_CONDITIONS = ("zero", "pluck", "mode_i_opening", "notch_opening", "plane_wave")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` holds one message per problem."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class ConfigParseError(ConfigError):
    """The text is not valid TOML."""

    def __init__(self, message: str, line: int | None, column: int | None):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__([f"parse error: {where}{message}"])


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "zero"
    amplitude: float = 0.0
    normal: tuple[float, ...] | None = None
    point: tuple[float, ...] | None = None
    wave_vector: tuple[float, ...] | None = None
    polarization: tuple[float, ...] | None = None


@dataclass(frozen=True)
class DynamicsConfig:
    t_end: float
    safety: float = 0.5
    dt: float | None = None
    stride: int = 1
    body_force: BodyForce = field(default_factory=BodyForce.none)


@dataclass(frozen=True)
class DiagnosticsConfig:
    process_zones: tuple[ProcessZoneParams, ...]
    direction_count: int = 64
    nucleation: bool = True
    vtk: bool = False
    lefm_u0: float | None = None


@dataclass(frozen=True)
class VerifyConfig:
    horizons: tuple[float, ...] = (0.2, 0.1, 0.05)
    fields: tuple[str, ...] = ("linear", "dilation", "pure-jump", "mode-I", "plane-wave")


@dataclass(frozen=True)
class RunConfig:
    material: MaterialModel
    domain: DomainSpec
    dynamics: DynamicsConfig
    diagnostics: DiagnosticsConfig
    initial: InitialCondition = InitialCondition()
    verify: VerifyConfig = VerifyConfig()
    threads: int | None = None


# ---------------------------------------------------------------------------
# Small typed readers that record problems instead of raising.
# ---------------------------------------------------------------------------

class _Reader:
    def __init__(self) -> None:
        self.errors: list[str] = []

    def table(self, doc: dict, key: str, path: str, required: bool = False) -> dict:
        value = doc.get(key)
        if value is None:
            if required:
                self.errors.append(f"{path}: missing required table")
            return {}
        if not isinstance(value, dict):
            self.errors.append(f"{path}: expected a table")
            return {}
        return value

    def unknown(self, doc: dict, allowed: set[str], path: str) -> None:
        for key in sorted(set(doc) - allowed):
            self.errors.append(f"{path}.{key}: unknown key")

    def number(self, doc: dict, key: str, path: str, default: Any = None, *,
               required: bool = False, positive: bool = False, integer: bool = False):
        full = f"{path}.{key}"
        if key not in doc:
            if required:
                self.errors.append(f"{full}: missing required key")
            return default
        value = doc[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.errors.append(f"{full}: expected a number, got {value!r}")
            return default
        if integer and not isinstance(value, int):
            self.errors.append(f"{full}: expected an integer, got {value!r}")
            return default
        if positive and not value > 0:
            self.errors.append(f"{full}: must be positive, got {value!r}")
            return default
        return value if integer else float(value)

    def flag(self, doc: dict, key: str, path: str, default: bool) -> bool:
        value = doc.get(key, default)
        if not isinstance(value, bool):
            self.errors.append(f"{path}.{key}: expected true or false")
            return default
        return value

    def choice(self, doc: dict, key: str, path: str, options: tuple[str, ...], default: str) -> str:
        value = doc.get(key, default)
        if value not in options:
            self.errors.append(f"{path}.{key}: expected one of {', '.join(options)}, got {value!r}")
            return default
        return value

    def vector(self, doc: dict, key: str, path: str, length: int | None = None,
               required: bool = False):
        full = f"{path}.{key}"
        if key not in doc:
            if required:
                self.errors.append(f"{full}: missing required key")
            return None
        value = doc[key]
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            self.errors.append(f"{full}: expected a list of numbers")
            return None
        if length is not None and len(value) != length:
            self.errors.append(f"{full}: expected {length} components, got {len(value)}")
            return None
        return tuple(float(v) for v in value)


# ---------------------------------------------------------------------------
# Sections.
# ---------------------------------------------------------------------------

def _influence(r: _Reader, doc: dict) -> InfluenceFunction | None:
    path = "material.influence"
    r.unknown(doc, {"kind", "scale", "r", "values"}, path)
    kind = r.choice(doc, "kind", path, INFLUENCES, "constant")
    scale = r.number(doc, "scale", path, 1.0, positive=True)
    try:
        if kind == "table":
            radii = r.vector(doc, "r", path, required=True)
            values = r.vector(doc, "values", path, required=True)
            if radii is None or values is None:
                return None
            return InfluenceFunction.from_table(radii, values)
        return InfluenceFunction.constant(scale) if kind == "constant" else InfluenceFunction.conical(scale)
    except ValueError as exc:
        r.errors.append(f"{path}: {exc}")
        return None


def _material(r: _Reader, doc: dict, dimension_hint: int | None) -> MaterialModel | None:
    path = "material"
    r.unknown(doc, {"density", "horizon", "dimension", "profile", "initial_slope", "plateau",
                    "table", "fit", "influence"}, path)
    density = r.number(doc, "density", path, 1.0, positive=True)
    horizon = r.number(doc, "horizon", path, required=True, positive=True)
    dimension = r.number(doc, "dimension", path, dimension_hint or 2, integer=True)
    if dimension not in (2, 3):
        r.errors.append(f"material.dimension: must be 2 or 3, got {dimension!r}")
        dimension = 2
    if dimension_hint is not None and dimension != dimension_hint:
        r.errors.append(f"material.dimension: {dimension} does not match domain.bounds ({dimension_hint} axes)")
    J = _influence(r, r.table(doc, "influence", "material.influence"))

    fit = r.table(doc, "fit", "material.fit")
    raw_keys = [k for k in ("initial_slope", "plateau", "table") if k in doc]
    profile = r.choice(doc, "profile", path, PROFILES, "exponential")
    potential = None
    if fit and raw_keys:
        r.errors.append(
            f"material.fit: fit targets and raw profile parameters ({', '.join(raw_keys)}) are mutually exclusive")
    elif fit:
        r.unknown(fit, {"mu", "Gc"}, "material.fit")
        mu = r.number(fit, "mu", "material.fit", required=True, positive=True)
        gc = r.number(fit, "Gc", "material.fit", required=True, positive=True)
        if "profile" in doc and profile != "exponential":
            r.errors.append("material.profile: fit targets produce an exponential profile")
        if mu is not None and gc is not None and J is not None:
            potential = fit_kernel(mu, gc, J, dimension)
    elif profile == "table":
        table = r.table(doc, "table", "material.table", required=True)
        r.unknown(table, {"rho", "values"}, "material.table")
        rho = r.vector(table, "rho", "material.table", required=True)
        values = r.vector(table, "values", "material.table", required=True)
        if rho is not None and values is not None:
            try:
                potential = CohesivePotential.from_table(rho, values)
            except ValueError as exc:
                r.errors.append(f"material.table: {exc}")
    else:
        slope = r.number(doc, "initial_slope", path, 1.0, positive=True)
        plateau = r.number(doc, "plateau", path, 1.0, positive=True)
        if slope is not None and plateau is not None:
            make = CohesivePotential.exponential if profile == "exponential" else CohesivePotential.rational
            potential = make(slope, plateau)
    if None in (density, horizon, potential, J):
        return None
    return MaterialModel(density, horizon, dimension, potential, J)


def _domain(r: _Reader, doc: dict, horizon: float | None) -> DomainSpec | None:
    path = "domain"
    r.unknown(doc, {"bounds", "spacing", "m_ratio", "collar_thickness", "notch", "periodic"}, path)
    bounds = doc.get("bounds")
    ok = (isinstance(bounds, list) and len(bounds) in (2, 3)
          and all(isinstance(b, list) and len(b) == 2
                  and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in b)
                  for b in bounds))
    if "bounds" not in doc:
        r.errors.append("domain.bounds: missing required key")
    elif not ok:
        r.errors.append("domain.bounds: expected 2 or 3 pairs [lo, hi]")
    has_spacing, has_ratio = "spacing" in doc, "m_ratio" in doc
    spacing = None
    if has_spacing and has_ratio:
        r.errors.append("domain.spacing: give either spacing or m_ratio, not both")
    elif has_ratio:
        ratio = r.number(doc, "m_ratio", path, positive=True)
        if ratio is not None and horizon is not None:
            spacing = horizon / ratio
    else:
        spacing = r.number(doc, "spacing", path, required=True, positive=True)
    collar = r.number(doc, "collar_thickness", path, required=True)
    periodic = doc.get("periodic")
    if periodic is not None and (not isinstance(periodic, list)
                                 or not all(isinstance(p, bool) for p in periodic)):
        r.errors.append("domain.periodic: expected a list of booleans")
        periodic = None
    notch = doc.get("notch", [])
    if not isinstance(notch, list):
        r.errors.append("domain.notch: expected a list of segments or polygons")
        notch = []
    if not ok or None in (spacing, collar, horizon):
        return None
    try:
        return DomainSpec(tuple(tuple(b) for b in bounds), spacing, horizon, collar,
                          tuple(notch), None if periodic is None else tuple(periodic))
    except (ValueError, TypeError) as exc:
        for message in str(exc).split("; "):
            key = message.split(":", 1)[0].strip()
            if key in ("bounds", "spacing", "horizon", "collar_thickness", "periodic") \
                    or key.startswith("notch"):
                prefix = "material." if key == "horizon" else "domain."
                r.errors.append(prefix + message)
            else:
                r.errors.append(f"domain: {message}")
        return None


def _body_force(r: _Reader, doc: dict, d: int) -> BodyForce:
    path = "dynamics.body_force"
    r.unknown(doc, {"kind", "vector", "ramp_time", "wave_vector", "omega"}, path)
    kind = r.choice(doc, "kind", path, BODY_FORCES, "none")
    if kind == "none":
        return BodyForce.none()
    vector = r.vector(doc, "vector", path, d, required=True)
    try:
        if kind == "constant" and vector is not None:
            return BodyForce.constant(vector)
        if kind == "ramped":
            ramp = r.number(doc, "ramp_time", path, required=True, positive=True)
            if vector is not None and ramp is not None:
                return BodyForce.ramped(vector, ramp)
        if kind == "plane_wave":
            k = r.vector(doc, "wave_vector", path, d, required=True)
            omega = r.number(doc, "omega", path, required=True)
            if None not in (vector, k, omega):
                return BodyForce.plane_wave(vector, k, omega)
    except ValueError as exc:
        r.errors.append(f"{path}: {exc}")
    return BodyForce.none()


def _dynamics(r: _Reader, doc: dict, d: int) -> DynamicsConfig | None:
    path = "dynamics"
    r.unknown(doc, {"t_end", "safety", "dt", "stride", "body_force"}, path)
    t_end = r.number(doc, "t_end", path, required=True, positive=True)
    safety = r.number(doc, "safety", path, 0.5, positive=True)
    if safety is not None and safety > 1.0:
        r.errors.append(f"dynamics.safety: must lie in (0, 1], got {safety}")
    dt = r.number(doc, "dt", path, None, positive=True)
    stride = r.number(doc, "stride", path, 1, positive=True, integer=True)
    body = _body_force(r, r.table(doc, "body_force", "dynamics.body_force"), d)
    if t_end is None:
        return None
    return DynamicsConfig(t_end, safety or 0.5, dt, stride or 1, body)


def _diagnostics(r: _Reader, doc: dict, material: MaterialModel | None) -> DiagnosticsConfig:
    path = "diagnostics"
    r.unknown(doc, {"process_zones", "fracture_set", "direction_count", "nucleation", "vtk",
                    "lefm_u0"}, path)
    zones: list[ProcessZoneParams] = []
    if r.flag(doc, "fracture_set", path, True) and material is not None:
        zones.append(ProcessZoneParams.fracture_set(material))
    entries = doc.get("process_zones", [])
    if not isinstance(entries, list):
        r.errors.append("diagnostics.process_zones: expected an array of tables")
        entries = []
    for k, entry in enumerate(entries):
        where = f"diagnostics.process_zones[{k}]"
        if not isinstance(entry, dict):
            r.errors.append(f"{where}: expected a table")
            continue
        r.unknown(entry, {"k_threshold", "alpha", "theta"}, where)
        kth = r.number(entry, "k_threshold", where, required=True, positive=True)
        alpha = r.number(entry, "alpha", where, 0.5)
        theta = r.number(entry, "theta", where, 0.5)
        if None in (kth, alpha, theta):
            continue
        try:
            params = ProcessZoneParams(kth, alpha, theta)
            if material is not None:
                params.check_against(material)
            zones.append(params)
        except ValueError as exc:
            r.errors.append(f"{where}: {exc}")
    count = r.number(doc, "direction_count", path, 64, positive=True, integer=True)
    lefm = r.number(doc, "lefm_u0", path, None)
    return DiagnosticsConfig(tuple(zones), count or 64, r.flag(doc, "nucleation", path, True),
                             r.flag(doc, "vtk", path, False), lefm)


def _initial(r: _Reader, doc: dict, d: int) -> InitialCondition:
    path = "initial"
    r.unknown(doc, {"kind", "amplitude", "normal", "point", "wave_vector", "polarization"}, path)
    kind = r.choice(doc, "kind", path, INITIAL_CONDITIONS, "zero")
    amplitude = r.number(doc, "amplitude", path, 0.0)
    normal = r.vector(doc, "normal", path, d)
    point = r.vector(doc, "point", path, d)
    k = r.vector(doc, "wave_vector", path, d, required=kind == "plane_wave")
    p = r.vector(doc, "polarization", path, d, required=kind == "plane_wave")
    if kind in ("pluck", "notch_opening") and d != 2:
        r.errors.append(f"initial.kind: {kind} is defined for 2-D domains only")
    return InitialCondition(kind, amplitude or 0.0, normal, point, k, p)


def _verify(r: _Reader, doc: dict) -> VerifyConfig:
    path = "verify"
    r.unknown(doc, {"horizons", "fields"}, path)
    horizons = r.vector(doc, "horizons", path) or VerifyConfig.horizons
    if any(not 0.0 < e < 1.0 for e in horizons):
        r.errors.append("verify.horizons: every horizon must lie in (0, 1)")
    fields = doc.get("fields", list(VerifyConfig.fields))
    if not isinstance(fields, list) or any(f not in VerifyConfig.fields for f in fields):
        r.errors.append(f"verify.fields: expected a subset of {', '.join(VerifyConfig.fields)}")
        fields = list(VerifyConfig.fields)
    return VerifyConfig(tuple(horizons), tuple(fields))


def parse_config(text: str) -> RunConfig:
    """Parse and validate TOML ``text``; raise :class:`ConfigError` listing every problem."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigParseError(getattr(exc, "msg", str(exc)), getattr(exc, "lineno", None),
                               getattr(exc, "colno", None)) from None
    r = _Reader()
    r.unknown(doc, {"material", "domain", "dynamics", "diagnostics", "initial", "verify", "run"}, "")
    r.errors[:] = [e.lstrip(".") for e in r.errors]
    domain_doc = r.table(doc, "domain", "domain", required=True)
    bounds = domain_doc.get("bounds")
    hint = len(bounds) if isinstance(bounds, list) and len(bounds) in (2, 3) else None
    material_doc = r.table(doc, "material", "material", required=True)
    material = _material(r, material_doc, hint)
    horizon = material_doc.get("horizon")
    if isinstance(horizon, bool) or not isinstance(horizon, (int, float)) or not horizon > 0:
        horizon = None
    domain = _domain(r, domain_doc, horizon)
    d = material.dimension if material is not None else (hint or 2)
    dynamics = _dynamics(r, r.table(doc, "dynamics", "dynamics", required=True), d)
    diagnostics = _diagnostics(r, r.table(doc, "diagnostics", "diagnostics"), material)
    initial = _initial(r, r.table(doc, "initial", "initial"), d)
    verify = _verify(r, r.table(doc, "verify", "verify"))
    run_doc = r.table(doc, "run", "run")
    r.unknown(run_doc, {"threads"}, "run")
    threads = r.number(run_doc, "threads", "run", None, positive=True, integer=True)
    if r.errors or None in (material, domain, dynamics):
        raise ConfigError(r.errors or ["configuration incomplete"])
    return RunConfig(material, domain, dynamics, diagnostics, initial, verify, threads)
