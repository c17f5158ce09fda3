"""
Run configuration: strict JSON schema, validation with field paths, presets.

A configuration document looks like::

    {
      "mode": "compare",
      "system": {"topology": "ladder", "M": 8, "b_x": 1.0, "b_y": 0.1},
      "initial": {"kind": "entangled", "site": 0, "n_realizations": 1, "master_seed": 0},
      "propagator": {"kind": "exact"},
      "grid": {"t_max": 60.0, "n_samples": 600},
      "observe": {"site": 0},
      "output": {"csv": "trace.csv", "svg": "trace.svg", "manifest": "manifest.json"}
    }
"""

import copy
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from spintypicality.errors import ConfigError, SpinError
from spintypicality.experiments import TimeGrid
from spintypicality.hamiltonian import (
    AnisotropyKind,
    build_chain,
    build_ladder,
    build_star,
    load_edge_list,
    local_second_moment,
)
from spintypicality.helpers import SEED_LIMIT
from spintypicality.propagators import MAX_EXACT_SITES, default_dt

logger = logging.getLogger(__name__)

MODES = ("pure", "averaged", "oracle", "compare", "typicality")
STATE_KINDS = ("entangled", "product")
PROPAGATORS = ("exact", "trotter")

SCHEMA = {
    "system": {"topology", "M", "b", "b_x", "b_y", "sigma", "anisotropy", "network_seed", "edge_list"},
    "initial": {"kind", "site", "n_realizations", "master_seed", "include_oracle"},
    "propagator": {"kind", "dt"},
    "grid": {"t_max", "n_samples"},
    "observe": {"site"},
    "output": {"csv", "svg", "manifest"},
}

LADDER_T_MAX = 60.0
LADDER_SAMPLES = 600
STAR_T_MAX = 10.0
STAR_SAMPLES = 400

PRESETS = {
    "fig3a": {
        "mode": "typicality",
        "system": {"topology": "ladder", "M": 14, "b_x": 1.0, "b_y": 0.1},
        "initial": {"site": 0, "n_realizations": 630, "master_seed": 2008},
        "propagator": {"kind": "trotter", "dt": 0.02},
        "grid": {"t_max": 60.0, "n_samples": 600},
        "observe": {"site": 0},
        "output": {"csv": "fig3a.csv", "svg": "fig3a.svg", "manifest": "fig3a_manifest.json"},
    },
    "fig3b": {
        "mode": "typicality",
        "system": {"topology": "star", "M": 14, "sigma": 1.0, "network_seed": 7},
        "initial": {"site": 0, "n_realizations": 1, "master_seed": 2008},
        "propagator": {"kind": "trotter"},
        "observe": {"site": 0},
        "output": {"csv": "fig3b.csv", "svg": "fig3b.svg", "manifest": "fig3b_manifest.json"},
    },
}


@dataclass(frozen=True)
class SystemConfig:
    topology: str
    m_sites: int
    b: float = None
    b_x: float = None
    b_y: float = None
    sigma: float = None
    anisotropy: str = None
    network_seed: int = None
    edge_list: str = None

    def build_network(self):
        if self.topology == "chain":
            return build_chain(self.m_sites, self.b, AnisotropyKind(self.anisotropy))
        if self.topology == "ladder":
            return build_ladder(self.m_sites, self.b_x, self.b_y)
        if self.topology == "star":
            return build_star(self.m_sites, self.sigma, self.network_seed)
        net = load_edge_list(self.edge_list)
        if net.m_sites != self.m_sites:
            raise ConfigError(f"system.M: {self.m_sites} does not match the {net.m_sites} sites of {self.edge_list}")
        return net

    @property
    def time_unit(self):
        return {"chain": "1/b", "ladder": "1/b_x", "star": "1/σ"}.get(self.topology, "1/b_max")


@dataclass(frozen=True)
class InitialConfig:
    kind: str = "entangled"
    site: int = 0
    n_realizations: int = 1
    master_seed: int = 0
    include_oracle: bool = False


@dataclass(frozen=True)
class PropagatorConfig:
    kind: str
    dt: float = None


@dataclass(frozen=True)
class GridConfig:
    t_max: float
    n_samples: int

    def to_grid(self):
        return TimeGrid(self.t_max, self.n_samples)


@dataclass(frozen=True)
class OutputConfig:
    csv: str = "trace.csv"
    svg: str = None
    manifest: str = "manifest.json"


@dataclass(frozen=True)
class RunConfig:
    mode: str
    system: SystemConfig
    initial: InitialConfig
    propagator: PropagatorConfig
    grid: GridConfig
    observed_site: int
    output: OutputConfig

    def to_dict(self):
        """The resolved configuration as a document ``validate`` accepts."""
        system = {
            "topology": self.system.topology,
            "M": self.system.m_sites,
            "b": self.system.b,
            "b_x": self.system.b_x,
            "b_y": self.system.b_y,
            "sigma": self.system.sigma,
            "anisotropy": self.system.anisotropy,
            "network_seed": self.system.network_seed,
            "edge_list": self.system.edge_list,
        }
        return {
            "mode": self.mode,
            "system": {k: v for k, v in system.items() if v is not None},
            "initial": dict(vars(self.initial)),
            "propagator": {k: v for k, v in vars(self.propagator).items() if v is not None},
            "grid": dict(vars(self.grid)),
            "observe": {"site": self.observed_site},
            "output": {k: v for k, v in vars(self.output).items() if v is not None},
        }


class _Checker:
    """Collects ``field.path: message`` errors while reading a document."""

    def __init__(self):
        self.errors = []

    def fail(self, path, message):
        self.errors.append(f"{path}: {message}")

    def section(self, document, name):
        value = document.get(name, {})
        if not isinstance(value, dict):
            self.fail(name, "must be an object")
            return {}
        for key in sorted(set(value) - SCHEMA[name]):
            self.fail(f"{name}.{key}", "unknown key")
        return value

    def integer(self, section, name, key, default=None, minimum=None, maximum=None):
        value = section.get(key, default)
        if value is None:
            if default is None and key not in section:
                self.fail(f"{name}.{key}", "is required")
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"{name}.{key}", f"must be an integer, got {value!r}")
            return None
        if minimum is not None and value < minimum or maximum is not None and value > maximum:
            self.fail(f"{name}.{key}", f"{value} out of range")
            return None
        return value

    def real(self, section, name, key, default=None, positive=False):
        value = section.get(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(f"{name}.{key}", f"must be a finite number, got {value!r}")
            return None
        if positive and value <= 0:
            self.fail(f"{name}.{key}", f"must be positive, got {value}")
            return None
        return float(value)

    def boolean(self, section, name, key, default=False):
        value = section.get(key, default)
        if not isinstance(value, bool):
            self.fail(f"{name}.{key}", f"must be true or false, got {value!r}")
            return default
        return value

    def choice(self, section, name, key, choices, default=None):
        value = section.get(key, default)
        if value not in choices:
            self.fail(f"{name}.{key}", f"must be one of {', '.join(choices)}, got {value!r}")
            return None
        return value

    def path(self, section, name, key, default=None):
        value = section.get(key, default)
        if value is not None and not isinstance(value, str):
            self.fail(f"{name}.{key}", f"must be a path string, got {value!r}")
            return None
        return value


def _system(check, document, base_dir):
    raw = check.section(document, "system")
    topology = check.choice(raw, "system", "topology", ("chain", "ladder", "star", "custom"))
    m_sites = check.integer(raw, "system", "M", minimum=1)
    fields = {"topology": topology, "m_sites": m_sites}
    if topology == "chain":
        fields["b"] = check.real(raw, "system", "b", default=1.0)
        fields["anisotropy"] = check.choice(raw, "system", "anisotropy", [k.value for k in AnisotropyKind], "xy")
    elif topology == "ladder":
        if m_sites is not None and (m_sites < 4 or m_sites % 2):
            check.fail("system.M", f"a ladder needs an even number of sites >= 4, got {m_sites}")
        fields["b_x"] = check.real(raw, "system", "b_x", default=1.0, positive=True)
        fields["b_y"] = check.real(raw, "system", "b_y", default=0.1)
    elif topology == "star":
        if m_sites is not None and m_sites < 2:
            check.fail("system.M", f"a star needs at least 2 sites, got {m_sites}")
        fields["sigma"] = check.real(raw, "system", "sigma", default=1.0, positive=True)
        fields["network_seed"] = check.integer(raw, "system", "network_seed", 0, 0, SEED_LIMIT - 1)
    elif topology == "custom":
        edge_list = check.path(raw, "system", "edge_list")
        if edge_list is None:
            check.fail("system.edge_list", "is required for a custom topology")
        elif base_dir is not None and not Path(edge_list).is_absolute():
            edge_list = str(Path(base_dir) / edge_list)
        fields["edge_list"] = edge_list
    extra = {"b", "b_x", "b_y", "sigma", "anisotropy", "network_seed", "edge_list"} - set(fields)
    for key in sorted(extra & set(raw)) if topology else ():
        check.fail(f"system.{key}", f"does not apply to a {topology} network")
    return fields


def _default_grid(system, net):
    if system.topology == "star":
        return STAR_T_MAX / math.sqrt(local_second_moment(system.m_sites, system.sigma)), STAR_SAMPLES
    if system.topology == "ladder":
        return LADDER_T_MAX / system.b_x, LADDER_SAMPLES
    scale = abs(system.b) if system.topology == "chain" and system.b else net.b_max
    return LADDER_T_MAX / (scale or 1.0), LADDER_SAMPLES


def validate(document, base_dir=None):
    """
    Checks a configuration document and resolves every default.

    Args
    ----------
    document : dict
        Parsed JSON configuration
    base_dir : str, optional
        Directory relative edge-list paths are resolved against

    Returns
    -------
     RunConfig: normalized configuration

    Raises
    ------
     ConfigError: with one ``field.path: message`` entry per violation
    """
    check = _Checker()
    if not isinstance(document, dict):
        raise ConfigError("configuration must be a JSON object", ["$: must be an object"])
    for key in sorted(set(document) - set(SCHEMA) - {"mode"}):
        check.fail(key, "unknown key")
    mode = check.choice(document, "$", "mode", MODES, "compare")
    system_fields = _system(check, document, base_dir)
    m_sites = system_fields["m_sites"]

    raw = check.section(document, "initial")
    site_max = m_sites - 1 if m_sites else None
    initial = InitialConfig(
        kind=check.choice(raw, "initial", "kind", STATE_KINDS, "entangled"),
        site=check.integer(raw, "initial", "site", 0, 0, site_max),
        n_realizations=check.integer(raw, "initial", "n_realizations", 1, 1),
        master_seed=check.integer(raw, "initial", "master_seed", 0, 0, SEED_LIMIT - 1),
        include_oracle=check.boolean(raw, "initial", "include_oracle"),
    )
    raw_observe = check.section(document, "observe")
    observed_site = check.integer(raw_observe, "observe", "site", initial.site or 0, 0, site_max)

    raw_propagator = check.section(document, "propagator")
    default_kind = "exact" if m_sites is None or m_sites <= MAX_EXACT_SITES else "trotter"
    kind = check.choice(raw_propagator, "propagator", "kind", PROPAGATORS, default_kind)
    dt = check.real(raw_propagator, "propagator", "dt", positive=True)

    raw_grid = check.section(document, "grid")
    t_max = check.real(raw_grid, "grid", "t_max", positive=True)
    n_samples = check.integer(raw_grid, "grid", "n_samples", -1)
    if n_samples is not None and n_samples != -1 and n_samples < 2:
        check.fail("grid.n_samples", f"a grid needs at least 2 samples, got {n_samples}")

    raw_output = check.section(document, "output")
    output = OutputConfig(
        csv=check.path(raw_output, "output", "csv", "trace.csv"),
        svg=check.path(raw_output, "output", "svg"),
        manifest=check.path(raw_output, "output", "manifest", "manifest.json"),
    )
    if check.errors:
        raise ConfigError(f"{len(check.errors)} configuration error(s)", check.errors)

    system = SystemConfig(**{k: v for k, v in system_fields.items() if v is not None})
    try:
        net = system.build_network()
    except (SpinError, OSError) as error:
        raise ConfigError(str(error), [f"system: {error}"])
    if kind == "trotter" and dt is None:
        dt = default_dt(net)
    default_t_max, default_samples = _default_grid(system, net)
    grid = GridConfig(t_max if t_max is not None else default_t_max, n_samples if n_samples != -1 else default_samples)
    config = RunConfig(mode, system, initial, PropagatorConfig(kind, dt), grid, observed_site, output)
    logger.debug("validated %s run on a %d-site %s", mode, m_sites, system.topology)
    return config


def load_config(path):
    """Reads a JSON configuration document; ``validate`` checks it."""
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path}: invalid JSON", [f"$: {error}"])


def preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}", [f"preset: must be one of {', '.join(PRESETS)}"])
    return copy.deepcopy(PRESETS[name])


def with_master_seed(document, seed):
    document = copy.deepcopy(document)
    document.setdefault("initial", {})["master_seed"] = seed
    return document
