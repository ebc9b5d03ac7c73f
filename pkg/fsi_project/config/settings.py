"""
Run configuration: strict TOML schema, validation with full error lists,
canonical serialization and ``section.key=value`` overrides.

Every problem found is reported (unknown key, type mismatch, constraint
violation), each with its key path and source line.
"""

import json
import math
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from core.errors import ConfigError, ConfigurationError
from core.grid import GridSpec
from physics.params import PROFILES, ModelParams
from utils.logging_conf import get_logger

logger = get_logger(__name__)

PRESETS = ("rest", "spinodal", "bubble", "channel-thrombus", "taylor-green", "swirl", "checkpoint")
MMS_CASES = ("taylor-green", "spinodal", "swirl", "coupled", "rest")

# (name, kind, default, constraint) per key; kind in float/int/str/bool/floats/ints
_POSITIVE = ("positive", lambda v: v > 0)
_NON_NEGATIVE = ("non-negative", lambda v: v >= 0)
_UNIT = ("in (0, 1)", lambda v: 0 < v < 1)


def _one_of(options):
    return (f"one of {list(options)}", lambda v: v in options)


def _all(check):
    label, pred = check
    return (f"all {label}", lambda vs: len(vs) > 0 and all(pred(v) for v in vs))


SCHEMA: Dict[str, List[Tuple[str, str, Any, Optional[tuple]]]] = {
    "grid": [
        ("extents", "floats", [1.0, 1.0], _all(_POSITIVE)),
        ("cells", "ints", [32, 32], ("all >= 4", lambda vs: len(vs) > 0 and all(v >= 4 for v in vs))),
        ("bc_mode", "str", "physical", _one_of(("physical", "periodic"))),
    ],
    "params": [
        ("rho", "float", 1.0, _POSITIVE),
        ("lambda", "float", 1.0, _POSITIVE),
        ("gamma", "float", 1.0, _POSITIVE),
        ("tau", "float", 1.0, _POSITIVE),
        ("lambda_e", "float", 1.0, _NON_NEGATIVE),
        ("h", "float", 0.05, _POSITIVE),
        ("alpha", "float", 0.1, _POSITIVE),
        ("beta", "float", 10.0, _POSITIVE),
        ("eta_profile", "str", "smoothstep", _one_of(PROFILES)),
        ("eta_range", "floats", [1.0, 1.0], ("two entries", lambda vs: len(vs) == 2)),
        ("kappa_profile", "str", "smoothstep", _one_of(PROFILES)),
        ("kappa_range", "floats", [1.0, 1.0], ("two entries", lambda vs: len(vs) == 2)),
        ("stabilization", "float", None, _POSITIVE),
    ],
    "initial": [
        ("preset", "str", "rest", _one_of(PRESETS)),
        ("checkpoint", "str", "", None),
        ("phi_mean", "float", 0.5, None),
        ("amplitude", "float", 0.05, _NON_NEGATIVE),
        ("modes", "int", 4, _POSITIVE),
        ("radius", "float", 0.2, _POSITIVE),
        ("velocity", "float", 0.0, _NON_NEGATIVE),
        ("seed", "int", 0, _NON_NEGATIVE),
    ],
    "time": [
        ("dt_policy", "str", "fixed", _one_of(("fixed", "cfl"))),
        ("dt", "float", 1e-3, _POSITIVE),
        ("safety", "float", 0.5, ("in (0, 0.9]", lambda v: 0 < v <= 0.9)),
        ("dt_max", "float", 1e-2, _POSITIVE),
        ("t_end", "float", 0.1, _NON_NEGATIVE),
        ("max_steps", "int", 0, _NON_NEGATIVE),
    ],
    "solver": [
        ("tol", "float", 1e-10, _UNIT),
        ("max_iter", "int", 10_000, _POSITIVE),
        ("backend", "str", "numpy", _one_of(("numpy", "numba"))),
        ("threads", "int", 0, _NON_NEGATIVE),
    ],
    "output": [
        ("diagnostics_every", "int", 1, _POSITIVE),
        ("checkpoint_every", "int", 0, _NON_NEGATIVE),
        ("vtk_every", "int", 0, _NON_NEGATIVE),
        ("checkpoint_wall_minutes", "float", 0.0, _NON_NEGATIVE),
        ("excel", "bool", True, None),
    ],
    "run": [
        ("name", "str", "run", ("non-empty", lambda v: len(v) > 0)),
        ("c1", "float", 1.0, _POSITIVE),
    ],
    "galerkin": [
        ("cells", "ints", [16, 16], ("all >= 4", lambda vs: len(vs) > 0 and all(v >= 4 for v in vs))),
        ("n_list", "ints", [4, 16, 64, 0], _all(_NON_NEGATIVE)),
        ("dt", "float", 1e-4, _POSITIVE),
        ("t_end", "float", 0.01, _NON_NEGATIVE),
        ("eig_tol", "float", 1e-8, _UNIT),
        ("basis_cache", "str", "", None),
    ],
    "mms": [
        ("case", "str", "coupled", _one_of(MMS_CASES)),
        ("mode", "str", "space", _one_of(("space", "time"))),
        ("cells_list", "ints", [32, 64, 128], _all(("all >= 4", lambda v: v >= 4))),
        ("dt_list", "floats", [4e-3, 2e-3, 1e-3], _all(_POSITIVE)),
        ("t_end", "float", 0.05, _POSITIVE),
        ("dt_factor", "float", 0.25, _POSITIVE),
    ],
    "dependence": [
        ("deltas", "floats", [1e-3, 1e-4, 1e-5], _all(_POSITIVE)),
        ("t_end", "float", 0.1, _POSITIVE),
    ],
    "verify": [
        ("fault", "str", "none", _one_of(("none", "drag_sign"))),
        ("cells", "ints", [32, 32], ("all >= 4", lambda vs: len(vs) > 0 and all(v >= 4 for v in vs))),
        ("steps", "int", 20, _POSITIVE),
    ],
    "bench": [
        ("sizes", "ints", [64, 128], _all(("all >= 4", lambda v: v >= 4))),
        ("steps", "int", 100, _POSITIVE),
        ("warmup", "int", 10, _NON_NEGATIVE),
        ("threads", "ints", [1, 0], _all(_NON_NEGATIVE)),
    ],
}


@dataclass
class RunConfig:
    """Validated configuration; ``sections`` maps section -> key -> value."""
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.sections[section]

    def grid_spec(self) -> GridSpec:
        g = self.sections["grid"]
        return GridSpec(tuple(g["extents"]), tuple(g["cells"]), g["bc_mode"])

    def model_params(self) -> ModelParams:
        p = self.sections["params"]
        return ModelParams(
            rho=p["rho"], lam=p["lambda"], gamma=p["gamma"], tau=p["tau"], lam_e=p["lambda_e"],
            h=p["h"], alpha=p["alpha"], beta=p["beta"],
            eta_profile=p["eta_profile"], eta_range=tuple(p["eta_range"]),
            kappa_profile=p["kappa_profile"], kappa_range=tuple(p["kappa_range"]),
            stabilization=p["stabilization"],
        )

    def with_updates(self, updates: Dict[str, Dict[str, Any]]) -> "RunConfig":
        """Copy with some keys replaced (no re-validation of the new values)."""
        sections = {name: dict(values) for name, values in self.sections.items()}
        for name, values in updates.items():
            sections[name].update(values)
        return RunConfig(sections)


def default_config() -> RunConfig:
    return parse_config("")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_HEADER = re.compile(r"^\s*\[\s*([A-Za-z0-9_\-]+)\s*\]\s*(#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def _line_index(text: str) -> Dict[str, int]:
    """Map 'section.key' (and 'section') to its 1-based line in the source."""
    index: Dict[str, int] = {}
    section = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = _HEADER.match(line)
        if header:
            section = header.group(1)
            index.setdefault(section, number)
            continue
        key = _KEY.match(line)
        if key:
            path = f"{section}.{key.group(1)}" if section else key.group(1)
            index.setdefault(path, number)
    return index


def _type_ok(kind: str, value: Any) -> bool:
    def is_float(v):
        return isinstance(v, (int, float)) and not isinstance(v, bool)

    def is_int(v):
        return isinstance(v, int) and not isinstance(v, bool)

    return {
        "float": is_float,
        "int": is_int,
        "str": lambda v: isinstance(v, str),
        "bool": lambda v: isinstance(v, bool),
        "floats": lambda v: isinstance(v, list) and all(is_float(x) for x in v),
        "ints": lambda v: isinstance(v, list) and all(is_int(x) for x in v),
    }[kind](value)


def _normalize(kind: str, value: Any) -> Any:
    if kind == "float":
        return float(value)
    if kind == "floats":
        return [float(v) for v in value]
    if kind == "ints":
        return [int(v) for v in value]
    return value


def parse_literal(text: str) -> Any:
    """TOML literal -> python value; bare words fall back to strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> List[str]:
    """Apply ``section.key=value`` overrides in place; returns malformed-override errors."""
    errors = []
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            errors.append(f"override '{item}': expected section.key=value")
            continue
        path, value = item.split("=", 1)
        section, key = path.strip().split(".", 1)
        target = raw.setdefault(section, {})
        if not isinstance(target, dict):
            errors.append(f"override '{item}': '{section}' is not a section")
            continue
        target[key] = parse_literal(value.strip())
    return errors


def parse_config(text: str, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Parse and validate a TOML run configuration.

    Raises:
        ConfigError: carrying every problem found
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"parse error: {e}"]) from e

    errors = apply_overrides(raw, overrides)
    lines = _line_index(text)
    overridden = {item.split("=", 1)[0].strip() for item in overrides if "=" in item}

    def where(path: str) -> str:
        if path in overridden:
            return "(--set)"
        return f"(line {lines[path]})" if path in lines else "(line ?)"

    sections: Dict[str, Dict[str, Any]] = {}
    for name in raw:
        if name not in SCHEMA:
            errors.append(f"{name}: unknown section {where(name)}")
        elif not isinstance(raw[name], dict):
            errors.append(f"{name}: expected a table {where(name)}")

    for name, keys in SCHEMA.items():
        given = raw.get(name, {}) if isinstance(raw.get(name, {}), dict) else {}
        known = {k for k, *_ in keys}
        for key in given:
            if key not in known:
                errors.append(f"{name}.{key}: unknown key {where(f'{name}.{key}')}")
        values: Dict[str, Any] = {}
        for key, kind, default, constraint in keys:
            path = f"{name}.{key}"
            if key not in given:
                values[key] = default
                continue
            value = given[key]
            if not _type_ok(kind, value):
                errors.append(f"{path}: expected {kind}, got {type(value).__name__} {where(path)}")
                values[key] = default
                continue
            value = _normalize(kind, value)
            if kind in ("float", "floats"):
                flat = value if isinstance(value, list) else [value]
                if not all(math.isfinite(v) for v in flat):
                    errors.append(f"{path}: must be finite {where(path)}")
            if constraint is not None and not constraint[1](value):
                errors.append(f"{path}: must be {constraint[0]}, got {value!r} {where(path)}")
            values[key] = value
        sections[name] = values

    if not errors:
        errors.extend(_cross_checks(sections, where))
    if errors:
        for message in errors:
            logger.debug(f"[Config] {message}")
        raise ConfigError(errors)
    return RunConfig(sections)


def _cross_checks(sections: Dict[str, Dict[str, Any]], where: Callable[[str], str]) -> List[str]:
    errors = []
    grid = sections["grid"]
    if len(grid["extents"]) != len(grid["cells"]):
        errors.append(f"grid.cells: length must match grid.extents {where('grid.cells')}")
    elif len(grid["cells"]) not in (2, 3):
        errors.append(f"grid.cells: dimension must be 2 or 3 {where('grid.cells')}")
    initial = sections["initial"]
    if initial["preset"] == "checkpoint" and not initial["checkpoint"]:
        errors.append(f"initial.checkpoint: required when preset = 'checkpoint' {where('initial.checkpoint')}")
    if initial["preset"] == "taylor-green" and grid["bc_mode"] != "periodic":
        errors.append(f"initial.preset: 'taylor-green' needs grid.bc_mode = 'periodic' {where('initial.preset')}")
    if not errors:
        try:
            RunConfig(sections).model_params()
        except ConfigurationError as e:
            errors.append(f"params: {e} {where('params')}")
    return errors


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _literal(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_literal(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def serialize_config(config: RunConfig) -> str:
    """Canonical TOML: schema section and key order, every key present except unset optionals."""
    out = []
    for name, keys in SCHEMA.items():
        out.append(f"[{name}]")
        for key, *_ in keys:
            value = config.sections[name][key]
            if value is not None:
                out.append(f"{key} = {_literal(value)}")
        out.append("")
    return "\n".join(out)
