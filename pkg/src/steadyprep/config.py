"""Declarative run configuration: INI file, one section per model.

Every value is stored as a string exactly as parsed; typed access goes
through ``get``.  The config hash covers all parameter sections so output
files are traceable to the configuration that produced them (out paths and
worker counts are execution details and excluded).
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

__all__ = ["ExperimentConfig", "DEFAULTS"]

DEFAULTS: dict[str, dict[str, str]] = {
    "fermion": {
        "sizes": "10,12,14,16,18,20,24,28,32,36,40,44,48,52,56,60",
        "b_field": "1.0",
        "j_coupling": "1.0",
        "gamma_aniso": "0.9",
        "rates": "0.9,0.2,0.15,0.9",
        "epsilon": "0.1",
        "s_grid": "201",
    },
    "qubit": {
        "omega_x": "0.7071067811865476",
        "omega_z": "0.7071067811865476",
        "epsilon": "1e-2",
        "grid": "20",
        "g_min": "0.05",
        "g_max": "1.5",
        "t_min": "0.02",
        "t_max": "1.0",
        "slopes_t": "0.025",
        "slopes_g_min": "0.1",
        "slopes_g_max": "1.5",
        "slopes_points": "12",
        "crossing_beta": "1000",
    },
    "spike": {
        "sizes": "8,12,16,20",
        "g": "1.0",
        "beta": "1.0",
        "epsilon": "1e-2",
        "closed_epsilon": "1e-2",
        "instantaneous_beta": "10.0",
        "instantaneous_g": "1.0",
        "s_grid": "41",
    },
    "bounds": {
        "qubit_g": "0.1,0.5,1.0",
        "qubit_t": "0.025,0.5",
        "spike_sizes": "8,12",
        "tau_decades": "1,2,3,4",
        "zero_t_beta": "200",
    },
    "solver": {
        "rtol": "1e-9",
        "atol": "1e-12",
        "ttss_rtol": "1e-8",
        "ttss_atol": "1e-11",
        "cov_rtol": "1e-6",
        "cov_atol": "1e-9",
        "frame_steps": "1200",
        "gap_s_grid": "201",
    },
}


def _parse_bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)
    source: str = "<defaults>"

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")
        sections = {name: dict(parser.items(name)) for name in parser.sections()}
        return cls(sections=sections, source=str(path))

    def get(self, section: str, key: str, cast=str):
        raw = self.sections.get(section, {}).get(key)
        if raw is None:
            raw = DEFAULTS.get(section, {}).get(key)
        if raw is None:
            raise KeyError(f"no value or default for [{section}] {key}")
        if cast is bool:
            return _parse_bool(raw)
        return cast(raw)

    def get_list(self, section: str, key: str, cast=float) -> list:
        raw = str(self.get(section, key))
        return [cast(tok) for tok in raw.replace(";", ",").split(",") if tok.strip()]

    def set(self, section: str, key: str, value) -> None:
        self.sections.setdefault(section, {})[key] = str(value)

    def effective(self) -> dict:
        """Defaults overlaid with file values, every key echoed."""
        out = {}
        for section in sorted(set(DEFAULTS) | set(self.sections)):
            merged = dict(DEFAULTS.get(section, {}))
            merged.update(self.sections.get(section, {}))
            out[section] = dict(sorted(merged.items()))
        return out

    def hash(self) -> str:
        blob = "\n".join(f"{sec}.{k}={v}" for sec, kv in self.effective().items()
                         for k, v in kv.items())
        return hashlib.sha256(blob.encode()).hexdigest()[:12]
