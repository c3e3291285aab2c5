"""Run configuration: TOML loading, validation and canonical re-emission."""
from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError

DEFAULTS = {
    "surface": {"spec": "flat:Lx=1,Ly=1", "quadrature": 8},
    "immersion": {"spec": "id"},
    "discretization": {"ny": 2, "nz": 2, "nt": 2, "tol": 1e-10},
    "regime": {"gamma1": 1.0, "eps_law": "auto"},
    "run": {"output": "out", "seed": 0},
}
REQUIRED = ("surface", "material", "discretization", "regime")
N_BOUNDS = (1, 32)
EXPERIMENT_TYPES = ("threescale", "strong", "oscz", "limsup")
INLINE = ("profiles",)


def fmt_float(v) -> str:
    """Float text with 17 significant digits (``inf``/``nan`` spelled out)."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


@dataclass
class RunConfig:
    """Validated configuration sections."""
    sections: dict
    source: str | None = None
    experiments: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.sections[name]

    @property
    def seed(self):
        return int(self.sections["run"]["seed"])

    @property
    def output(self):
        return Path(self.sections["run"]["output"])

    def experiment(self, kinds, name=None):
        """Named experiment, or the first whose type is in ``kinds``."""
        if name is not None:
            if name not in self.experiments:
                raise ConfigError(f"missing section [experiment.{name}]")
            exp = self.experiments[name]
            if exp["type"] not in kinds:
                raise ConfigError(f"[experiment.{name}] has type {exp['type']!r}, "
                                  f"expected one of {list(kinds)}")
            return name, exp
        for n, exp in self.experiments.items():
            if exp["type"] in kinds:
                return n, exp
        raise ConfigError(f"missing section [experiment] of type "
                          f"{' or '.join(kinds)}")

    def to_toml(self) -> str:
        data = copy.deepcopy(self.sections)
        if self.experiments:
            data["experiment"] = copy.deepcopy(self.experiments)
        return dumps_toml(data)


def check_n(disc):
    for key in ("ny", "nz", "nt"):
        v = disc.get(key)
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"[discretization] {key} must be an integer")
        if not N_BOUNDS[0] <= v <= N_BOUNDS[1]:
            raise ConfigError(f"[discretization] {key}={v} outside "
                              f"[{N_BOUNDS[0]}, {N_BOUNDS[1]}]")


def gamma_value(g):
    if isinstance(g, str):
        if g.strip().lower() in ("inf", "infinity", "+inf"):
            return "inf"
        try:
            g = float(g)
        except ValueError:
            raise ConfigError(f"[regime] gamma1={g!r} is not a number or 'inf'")
    g = float(g)
    if math.isinf(g) and g > 0:
        return "inf"
    if not g >= 0:
        raise ConfigError("[regime] gamma1 must be >= 0")
    return g


def validate(data: dict, source=None) -> RunConfig:
    """Check required sections and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    for name in REQUIRED:
        if name not in data:
            raise ConfigError(f"missing section [{name}]")
    known = set(REQUIRED) | set(DEFAULTS) | {"experiment"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    sections = {}
    for name in sorted(set(DEFAULTS) | set(REQUIRED)):
        sec = dict(DEFAULTS.get(name, {}))
        sec.update(data.get(name, {}))
        sections[name] = sec
    check_n(sections["discretization"])
    sections["regime"]["gamma1"] = gamma_value(sections["regime"]["gamma1"])
    if "kind" not in sections["material"]:
        sections["material"]["kind"] = "svk"
    exps = {}
    for name, exp in (data.get("experiment") or {}).items():
        if not isinstance(exp, dict):
            raise ConfigError(f"[experiment.{name}] must be a table")
        kind = exp.get("type")
        if kind not in EXPERIMENT_TYPES:
            raise ConfigError(f"[experiment.{name}] type must be one of "
                              f"{list(EXPERIMENT_TYPES)}")
        exps[name] = dict(exp)
    return RunConfig(sections, source, exps)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}")
    return loads_config(text, str(path))


def loads_config(text: str, source=None) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}")
    return validate(data, source)


# --- TOML emission -----------------------------------------------------------

def _toml_key(k):
    k = str(k)
    if k and all(c.isalnum() or c in "_-" for c in k):
        return k
    return _toml_str(k)


def _toml_str(s):
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{out}"'


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        s = fmt_float(v)
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(v, str):
        return _toml_str(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{_toml_key(k)} = {_toml_value(x)}"
                               for k, x in v.items()) + "}"
    raise ConfigError(f"cannot serialize {type(v).__name__} to TOML")


def dumps_toml(data: dict) -> str:
    """Serialize nested tables of scalars, arrays and inline tables.

    Tables named in ``INLINE`` (profile component lists) are written inline.
    """
    lines = []

    def table(prefix, tbl):
        subs = {k: v for k, v in tbl.items()
                if isinstance(v, dict) and k not in INLINE}
        scalars = {k: v for k, v in tbl.items() if k not in subs}
        if prefix and (scalars or not subs):
            lines.append(f"[{prefix}]")
            for k, v in scalars.items():
                lines.append(f"{_toml_key(k)} = {_toml_value(v)}")
            lines.append("")
        for k, v in subs.items():
            table(f"{prefix}.{_toml_key(k)}" if prefix else _toml_key(k), v)

    table("", data)
    return "\n".join(lines).rstrip() + "\n"
