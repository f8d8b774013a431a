"""YAML system/bath configuration.

Schema (version 1)::

    schema: 1
    label: free text
    ring:
      n_sites: 32
      radius: 50.0                  # Angstrom
      site_energy: 12500.0          # cm^-1, scalar or list of n_sites
      loss_rate: 0.001              # ps^-1, scalar or list
      trap_rate: 0.0                # ps^-1, scalar or list
      dipoles:                      # optional; default alternating tangential
        pattern: alternating_tangential | tangential
        tilt_deg: 0.0               # out-of-plane tilt
      # or dipoles: [[x, y, z], ...]
    center_sites:
      - position: [x, y, z]
        dipole: [x, y, z]
        site_energy: 12000.0
        trap_rate: 4.0
        loss_rate: 0.0
    couplings:
      matrix: [[...]]               # explicit M x M, or the generator below
      dipole_strength: 348000.0     # cm^-1 Angstrom^3
      ring_nearest: [806.0, 377.0]  # alternating nearest-neighbour overrides
      overrides: [[i, j, value]]    # 1-based site labels
    disorder_sigma: 0.0
    bath:                           # defaults for the run
      reorg_energy: 100.0
      cutoff: 300.0
      temperature: 293.0
      corr_length: 0.0              # Angstrom, or "inf"
    numerics:
      bin_tol: 1.0e-6
      bin_tol_disordered: 1.0e-3
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .bath import BathSpec
from .errors import ConfigError, InvalidInputError
from .exciton import (DEFAULT_BIN_TOL, DISORDERED_BIN_TOL, ExcitonSystem, SiteConfig,
                      dipole_coupling_matrix, ring_geometry)

SCHEMA_VERSION = 1
DEFAULT_CONFIG = "lh1rc.yaml"


@dataclass(frozen=True)
class RunConfig:
    system: ExcitonSystem
    bath: BathSpec
    bin_tol: float = DEFAULT_BIN_TOL
    bin_tol_disordered: float = DISORDERED_BIN_TOL
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def parse_length(value):
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        return float(value)
    return float(value)


def config_hash(raw: dict) -> str:
    """SHA-256 over a canonical JSON rendering of the parsed config."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _per_site(value, n, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)) if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"{name}: expected a scalar or {n} values")
    return arr


def _ring_dipoles(spec, n):
    if spec is None:
        spec = {"pattern": "alternating_tangential"}
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    pattern = spec.get("pattern", "alternating_tangential")
    tilt = math.radians(float(spec.get("tilt_deg", 0.0)))
    phi = 2.0 * np.pi * np.arange(n) / n
    tangent = np.stack([-np.sin(phi), np.cos(phi), np.zeros(n)], axis=1)
    z = np.array([0.0, 0.0, 1.0])
    if pattern == "tangential":
        sgn = np.ones(n)
    elif pattern == "alternating_tangential":
        sgn = (-1.0) ** np.arange(1, n + 1)
    else:
        raise ConfigError(f"unknown dipole pattern {pattern!r}")
    d = math.cos(tilt) * tangent + math.sin(tilt) * z
    return sgn[:, None] * d


def build_system(raw: dict) -> ExcitonSystem:
    try:
        ring = raw["ring"]
        n = int(ring["n_sites"])
        radius = float(ring["radius"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"ring section incomplete: {exc}") from exc
    centers = raw.get("center_sites", []) or []
    try:
        positions, dipoles = ring_geometry(
            n, radius,
            center_sites=[(c["position"], c["dipole"]) for c in centers],
            ring_dipoles=_ring_dipoles(ring.get("dipoles"), n))
    except KeyError as exc:
        raise ConfigError(f"center site missing {exc}") from exc
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    energies = list(_per_site(ring["site_energy"], n, "ring.site_energy"))
    loss = list(_per_site(ring.get("loss_rate", 0.0), n, "ring.loss_rate"))
    trap = list(_per_site(ring.get("trap_rate", 0.0), n, "ring.trap_rate"))
    for c in centers:
        energies.append(float(c["site_energy"]))
        trap.append(float(c.get("trap_rate", 0.0)))
        loss.append(float(c.get("loss_rate", 0.0)))
    try:
        sites = tuple(SiteConfig(i + 1, positions[i], energies[i], dipoles[i], trap[i], loss[i])
                      for i in range(len(positions)))
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    M = len(sites)

    cpl = raw.get("couplings", {}) or {}
    if "matrix" in cpl:
        V = np.asarray(cpl["matrix"], dtype=float)
        if V.shape != (M, M):
            raise ConfigError(f"couplings.matrix must be {M}x{M}")
    else:
        overrides = []
        nearest = cpl.get("ring_nearest")
        if nearest:
            for i in range(n):
                overrides.append((i, (i + 1) % n, float(nearest[i % len(nearest)])))
        for i, j, v in cpl.get("overrides", []) or []:
            if not (1 <= i <= M and 1 <= j <= M):
                raise ConfigError(f"override ({i}, {j}) outside 1..{M}")
            overrides.append((int(i) - 1, int(j) - 1, float(v)))
        try:
            V = dipole_coupling_matrix(sites, float(cpl.get("dipole_strength", 0.0)), overrides)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return ExcitonSystem(sites, V, float(raw.get("disorder_sigma", 0.0)),
                             str(raw.get("label", "")), n_ring=n)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc


def build_bath(raw: dict, **overrides) -> BathSpec:
    b = dict(raw.get("bath", {}) or {})
    b.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return BathSpec(
            reorg_energy=float(b.get("reorg_energy", 100.0)),
            cutoff=float(b.get("cutoff", 300.0)),
            temperature=float(b.get("temperature", 293.0)),
            corr_length=parse_length(b.get("corr_length", 0.0)),
        )
    except (InvalidInputError, ValueError) as exc:
        raise ConfigError(f"bath: {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {raw.get('schema')!r}; expected {SCHEMA_VERSION}")
    num = raw.get("numerics", {}) or {}
    return RunConfig(build_system(raw), build_bath(raw),
                     float(num.get("bin_tol", DEFAULT_BIN_TOL)),
                     float(num.get("bin_tol_disordered", DISORDERED_BIN_TOL)), raw)


def load_config(path=None) -> RunConfig:
    """Load a config file; ``None`` loads the bundled LH1-RC default."""
    if path is None:
        text = resources.files("ringtrap.data").joinpath(DEFAULT_CONFIG).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    return parse_config(raw)
