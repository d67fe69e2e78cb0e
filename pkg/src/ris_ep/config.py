"""Experiment configuration: schema, defaults and TOML (de)serialisation.

A configuration file looks like the output of ``ris-ep simulate
--print-default-config``::

    seed = 20240601
    trials = 1000
    snr_db = [0.0, 5.0, 10.0]
    schemes = ["ep", "ls"]
    power = 1.0
    alpha = 16
    beta = 4
    channel_spectrum = "full"     # "full" or "kept"
    output = "results.csv"

    [array]            # RIS panel
    n_h = 16
    n_v = 16

    [bs]               # BS array and RIS-BS paths
    m_antennas = 16
    num_paths = 5
    los_variance = 1.0
    nlos_variance = 0.31622776601683794

    [pathloss]         # rho = 10^(ref_db/10) * (d / ref_distance)^-exponent
    ref_db = -20.0
    ref_distance = 1.0
    ris_bs_distance = 20.0
    ris_bs_exponent = 2.1
    ris_user_distance = 10.0
    ris_user_exponent = 2.2

    [eigenspace]
    mode = "fixed"     # "fixed": E split evenly over clusters; "energy": per-cluster share
    dimension = 32
    energy_fraction = 0.9
    epsilon_v = 1e-9

    [[clusters]]       # one table per cluster, angles in radians
    mean_azimuth = 0.9273
    mean_elevation = 0.3490658503988659
    asd_azimuth = 0.24434609527920614
    asd_elevation = 0.03490658503988659
    num_users = 2

Unknown keys are rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .channel_model import ClusterProfile
from .errors import ConfigurationError, InvalidArgumentError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = ["ExperimentConfig", "default_config", "dump_config", "load_config", "parse_config"]

DEG = math.pi / 180.0
REFERENCE_MEAN_AZIMUTHS = (0.9273, 1.3694, 1.7722, 2.2143)
SCHEMES = ("ep", "ls")


def _default_clusters() -> list[ClusterProfile]:
    return [ClusterProfile(mean_azimuth=a, mean_elevation=20 * DEG, asd_azimuth=14 * DEG,
                           asd_elevation=2 * DEG, num_users=2)
            for a in REFERENCE_MEAN_AZIMUTHS]


@dataclass(frozen=True)
class ExperimentConfig:
    n_h: int = 16
    n_v: int = 16
    m_antennas: int = 16
    clusters: tuple = field(default_factory=lambda: tuple(_default_clusters()))
    eigenspace_mode: str = "fixed"
    eigenspace_dim: int = 32
    energy_fraction: float = 0.9
    epsilon_v: float = 1e-9
    num_paths: int = 5
    los_variance: float = 1.0
    nlos_variance: float = 10 ** -0.5
    ref_db: float = -20.0
    ref_distance: float = 1.0
    ris_bs_distance: float = 20.0
    ris_bs_exponent: float = 2.1
    ris_user_distance: float = 10.0
    ris_user_exponent: float = 2.2
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 1000
    seed: int = 20240601
    schemes: tuple = SCHEMES
    power: float = 1.0
    alpha: float = 16
    beta: int = 4
    channel_spectrum: str = "full"
    noise_power: float | None = None
    output: str = "results.csv"

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        self.validate()

    # derived quantities -------------------------------------------------
    @property
    def n_elements(self) -> int:
        return self.n_h * self.n_v

    @property
    def k_users(self) -> int:
        return sum(c.num_users for c in self.clusters)

    @property
    def c_clusters(self) -> int:
        return len(self.clusters)

    @property
    def g_cadence(self) -> int:
        """Trials per RIS-BS channel realisation."""
        return max(1, int(self.alpha))

    def cluster_dimensions(self) -> list[int] | None:
        if self.eigenspace_mode != "fixed":
            return None
        return [self.eigenspace_dim // self.c_clusters] * self.c_clusters

    def validate(self) -> None:
        def bad(msg):
            raise ConfigurationError(msg)

        if self.n_h < 1 or self.n_v < 1 or self.m_antennas < 1:
            bad("array sizes must be positive")
        if not self.clusters:
            bad("at least one cluster is required")
        if self.trials < 1:
            bad("trials must be >= 1")
        if not self.snr_db:
            bad("snr_db must list at least one point")
        if not self.schemes or any(s not in SCHEMES for s in self.schemes):
            bad(f"schemes must be a nonempty subset of {SCHEMES}")
        if len(set(self.schemes)) != len(self.schemes):
            bad("schemes must not repeat")
        if self.eigenspace_mode not in ("fixed", "energy"):
            bad("eigenspace.mode must be 'fixed' or 'energy'")
        if self.eigenspace_mode == "fixed":
            if self.eigenspace_dim < self.c_clusters or self.eigenspace_dim % self.c_clusters:
                bad(f"eigenspace dimension {self.eigenspace_dim} is not a positive "
                    f"multiple of the {self.c_clusters} clusters")
        elif not 0 < self.energy_fraction <= 1:
            bad("energy_fraction must lie in (0, 1]")
        if self.channel_spectrum not in ("full", "kept"):
            bad("channel_spectrum must be 'full' or 'kept'")
        if self.num_paths < 1:
            bad("num_paths must be >= 1")
        if not self.power > 0:
            bad("power must be positive")
        if self.alpha < 1 or self.beta < 1:
            bad("alpha and beta must be >= 1")
        if self.noise_power is not None and self.noise_power < 0:
            bad("noise_power must be nonnegative")
        if self.seed < 0:
            bad("seed must be nonnegative")


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


_SECTIONS = {
    "array": {"n_h": "n_h", "n_v": "n_v"},
    "bs": {"m_antennas": "m_antennas", "num_paths": "num_paths",
           "los_variance": "los_variance", "nlos_variance": "nlos_variance"},
    "pathloss": {"ref_db": "ref_db", "ref_distance": "ref_distance",
                 "ris_bs_distance": "ris_bs_distance", "ris_bs_exponent": "ris_bs_exponent",
                 "ris_user_distance": "ris_user_distance",
                 "ris_user_exponent": "ris_user_exponent"},
    "eigenspace": {"mode": "eigenspace_mode", "dimension": "eigenspace_dim",
                   "energy_fraction": "energy_fraction", "epsilon_v": "epsilon_v"},
}
_TOP = ("seed", "trials", "snr_db", "schemes", "power", "alpha", "beta",
        "channel_spectrum", "noise_power", "output")
_CLUSTER_KEYS = ("mean_azimuth", "mean_elevation", "asd_azimuth", "asd_elevation", "num_users")


def parse_config(data: dict) -> ExperimentConfig:
    """Build a config from a parsed TOML document; missing keys take defaults."""
    kwargs = {}
    data = dict(data)
    for key in list(data):
        if key in _TOP:
            kwargs[key] = data.pop(key)
    for section, mapping in _SECTIONS.items():
        table = data.pop(section, {})
        if not isinstance(table, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key, value in table.items():
            if key not in mapping:
                raise ConfigurationError(f"unknown key {section}.{key}")
            kwargs[mapping[key]] = value
    if "clusters" in data:
        clusters = []
        for i, entry in enumerate(data.pop("clusters")):
            unknown = set(entry) - set(_CLUSTER_KEYS)
            if unknown:
                raise ConfigurationError(f"unknown key(s) in clusters[{i}]: {sorted(unknown)}")
            try:
                clusters.append(ClusterProfile(**entry))
            except (TypeError, InvalidArgumentError) as exc:
                raise ConfigurationError(f"clusters[{i}]: {exc}") from exc
        kwargs["clusters"] = clusters
    if data:
        raise ConfigurationError(f"unknown configuration key(s): {sorted(data)}")
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    return parse_config(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot render {v!r} as TOML")


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a config as TOML that :func:`load_config` reads back unchanged."""
    lines = []
    for key in _TOP:
        value = getattr(cfg, key)
        if value is None:
            continue
        lines.append(f"{key} = {_toml_value(value)}")
    for section, mapping in _SECTIONS.items():
        lines.append("")
        lines.append(f"[{section}]")
        for key, attr in mapping.items():
            lines.append(f"{key} = {_toml_value(getattr(cfg, attr))}")
    for c in cfg.clusters:
        lines.append("")
        lines.append("[[clusters]]")
        for key in _CLUSTER_KEYS:
            lines.append(f"{key} = {_toml_value(getattr(c, key))}")
    return "\n".join(lines) + "\n"

