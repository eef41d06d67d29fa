"""YAML scenario files.

Every key carries its unit as a suffix (``_us``, ``_cm_per_s``). Keys left out
take the value of the default scenario, so a file may override a single number.
Errors name the offending key and its line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any

import yaml

from .errors import AtomHomError, ConfigError, DomainError
from .estimators import IntegrationVolume, default_volumes
from .experiment import REFERENCE_TAU_GRID, DetectorSpec, PulseSchedule, SourceSpec, reference_scenario

PORTS = ("a", "b", "c", "d")


@dataclass(frozen=True)
class ScanSpec:
    tau_grid: tuple[float, ...] = REFERENCE_TAU_GRID
    shots_per_tau: int = 2000

    def __post_init__(self):
        if self.shots_per_tau < 1:
            raise DomainError("shots_per_tau must be >= 1")
        if not self.tau_grid:
            raise DomainError("tau grid is empty")


@dataclass(frozen=True)
class VolumeScanSpec:
    axis: str = "z"
    sizes: tuple[float, ...] = (0.3, 0.6, 1.2)

    def __post_init__(self):
        if self.axis not in ("z", "perp"):
            raise DomainError(f"axis must be 'z' or 'perp', got {self.axis!r}")
        if not self.sizes or any(x <= 0 for x in self.sizes) or list(self.sizes) != sorted(self.sizes):
            raise DomainError("sizes must be positive and ascending")


@dataclass(frozen=True)
class ScenarioConfig:
    source: SourceSpec
    schedule: PulseSchedule
    detector: DetectorSpec
    volumes: dict = field(default_factory=dict)
    scan: ScanSpec = ScanSpec()
    volume_scan: VolumeScanSpec = VolumeScanSpec()
    run_seed: int = 2015

    @classmethod
    def default(cls) -> "ScenarioConfig":
        src, sched, det = reference_scenario()
        return cls(src, sched, det, default_volumes(src))

    def volume(self, port: str) -> IntegrationVolume:
        return self.volumes[port]

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, run_seed=int(seed))

    def to_dict(self) -> dict:
        return _dump_config(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# yaml key -> (dataclass field, kind)
_SOURCE_KEYS = {
    "family": ("family", "str"),
    "mean_n_a": ("mean_n_a", "float"),
    "mean_n_b": ("mean_n_b", "float"),
    "pair_fraction": ("pair_fraction", "float"),
    "v_center_a_cm_per_s": ("v_center_a", "vec3"),
    "v_center_b_cm_per_s": ("v_center_b", "vec3"),
    "fwhm_z_cm_per_s": ("fwhm_z", "float"),
    "fwhm_perp_cm_per_s": ("fwhm_perp", "float"),
    "coherence_sigma_t_us": ("coherence_sigma_t", "float"),
    "mode_z_cm_per_s": ("mode_z", "float"),
    "mode_perp_cm_per_s": ("mode_perp", "float"),
    "mode_span_sigmas": ("mode_span", "float"),
}
_SCHEDULE_KEYS = {
    "t1_us": ("t1", "float"),
    "t2_us": ("t2", "float"),
    "t3_us": ("t3", "float"),
    "overlap_offset_us": ("overlap_offset_us", "float"),
    "mirror_reflectivity": ("mirror_reflectivity", "float"),
    "splitter_transmittance": ("splitter_transmittance", "float"),
    "raman_survival": ("raman_survival", "float"),
    "eta": ("eta", "float"),
    "apply_mirror": ("apply_mirror", "bool"),
    "apply_splitter": ("apply_splitter", "bool"),
}
_DETECTOR_KEYS = {
    "pixel_z_cm_per_s": ("pixel_z", "float"),
    "pixel_perp_cm_per_s": ("pixel_perp", "float"),
    "enabled": ("enabled", "bool"),
}
_VOLUME_KEYS = {
    "center_cm_per_s": ("center", "vec3"),
    "dv_z_cm_per_s": ("dv_z", "float"),
    "dv_perp_cm_per_s": ("dv_perp", "float"),
}
_SCAN_KEYS = {
    "tau_grid_us": ("tau_grid", "floats"),
    "shots_per_tau": ("shots_per_tau", "int"),
}
_VOLUME_SCAN_KEYS = {
    "axis": ("axis", "str"),
    "sizes_cm_per_s": ("sizes", "floats"),
}
_SECTIONS = {
    "source": _SOURCE_KEYS,
    "schedule": _SCHEDULE_KEYS,
    "detector": _DETECTOR_KEYS,
    "scan": _SCAN_KEYS,
    "volume_scan": _VOLUME_SCAN_KEYS,
}


def _line(node) -> int:
    return node.start_mark.line + 1


def _scalar(node, kind: str, path: str):
    if kind in ("vec3", "floats"):
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigError("expected a list of numbers", path, _line(node))
        vals = tuple(_scalar(n, "float", path) for n in node.value)
        if kind == "vec3" and len(vals) != 3:
            raise ConfigError(f"expected 3 components, got {len(vals)}", path, _line(node))
        return vals
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError(f"expected {kind}", path, _line(node))
    value = yaml.safe_load(yaml.serialize(node))
    ok = {
        "float": isinstance(value, (int, float)) and not isinstance(value, bool),
        "int": isinstance(value, int) and not isinstance(value, bool),
        "bool": isinstance(value, bool),
        "str": isinstance(value, str),
    }[kind]
    if not ok:
        raise ConfigError(f"expected {kind}, got {value!r}", path, _line(node))
    return float(value) if kind == "float" else value


def _mapping(node, path: str) -> list[tuple[str, Any]]:
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("expected a mapping", path or "<root>", _line(node))
    seen = set()
    out = []
    for k, v in node.value:
        key = k.value if isinstance(k, yaml.ScalarNode) else None
        if not isinstance(key, str):
            raise ConfigError("keys must be strings", path, _line(k))
        if key in seen:
            raise ConfigError("duplicate key", f"{path}.{key}" if path else key, _line(k))
        seen.add(key)
        out.append((key, k, v))
    return out


def _section(node, keys: dict, path: str) -> tuple[dict, int]:
    values = {}
    for key, knode, vnode in _mapping(node, path):
        if key not in keys:
            raise ConfigError(f"unknown key (expected one of {sorted(keys)})",
                              f"{path}.{key}", _line(knode))
        fname, kind = keys[key]
        values[fname] = _scalar(vnode, kind, f"{path}.{key}")
    return values, _line(node)


def _build(cls, base, values: dict, path: str, line: int):
    try:
        return replace(base, **values) if base is not None else cls(**values)
    except AtomHomError as exc:
        raise ConfigError(str(exc), path, line) from None


def load_config_text(text: str) -> ScenarioConfig:
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML syntax error: {exc.problem}", None,
                          mark.line + 1 if mark else None) from None
    cfg = ScenarioConfig.default()
    if root is None:
        return cfg
    parts: dict[str, Any] = {}
    for key, knode, vnode in _mapping(root, ""):
        if key == "run_seed":
            parts["run_seed"] = _scalar(vnode, "int", key)
        elif key == "volumes":
            vols = dict(cfg.volumes)
            for port, pnode, vn in _mapping(vnode, "volumes"):
                path = f"volumes.{port}"
                if port not in PORTS:
                    raise ConfigError(f"unknown port (expected one of {list(PORTS)})",
                                      path, _line(pnode))
                values, line = _section(vn, _VOLUME_KEYS, path)
                vols[port] = _build(IntegrationVolume, vols[port], values, path, line)
            parts["volumes"] = vols
        elif key in _SECTIONS:
            parts[key] = _section(vnode, _SECTIONS[key], key)
        else:
            raise ConfigError("unknown section", key, _line(knode))

    for key, base in (("source", cfg.source), ("schedule", cfg.schedule),
                      ("detector", cfg.detector), ("scan", cfg.scan),
                      ("volume_scan", cfg.volume_scan)):
        if key in parts:
            values, line = parts[key]
            parts[key] = _build(type(base), base, values, key, line)
    vols = parts.get("volumes", cfg.volumes)
    for p1, p2 in (("a", "b"), ("c", "d")):
        if vols[p1].overlaps(vols[p2]):
            raise ConfigError(f"volumes {p1} and {p2} overlap", "volumes")
    return replace(cfg, **parts)


def config_from_dict(d: dict) -> ScenarioConfig:
    return load_config_text(yaml.safe_dump(d, sort_keys=False))


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return load_config_text(text)


def _dump_section(obj, keys: dict) -> dict:
    out = {}
    for key, (fname, kind) in keys.items():
        v = getattr(obj, fname)
        out[key] = list(v) if kind in ("vec3", "floats") else v
    return out


def _dump_config(cfg: ScenarioConfig) -> dict:
    return {
        "run_seed": cfg.run_seed,
        "source": _dump_section(cfg.source, _SOURCE_KEYS),
        "schedule": _dump_section(cfg.schedule, _SCHEDULE_KEYS),
        "detector": _dump_section(cfg.detector, _DETECTOR_KEYS),
        "volumes": {p: _dump_section(v, _VOLUME_KEYS) for p, v in sorted(cfg.volumes.items())},
        "scan": _dump_section(cfg.scan, _SCAN_KEYS),
        "volume_scan": _dump_section(cfg.volume_scan, _VOLUME_SCAN_KEYS),
    }

