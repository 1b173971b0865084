"""Named experiment presets and config-to-object builders.

A config is a flat JSON document; an "include" key merges a named preset
underneath the explicit keys.  Profiles for the state families are radial
descriptors (amplitude, width, phase), never raw tensors, so configs
round-trip through serialization bit-exactly.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import numpy as np

from . import potentials as pots
from .fock import Dispersion, ModeBasis, build_family, line_modes, ball_modes, \
    radial_shell_modes
from .harness import SweepPlan
from .operators import ExternalPotential, ParticleGrid


class ConfigError(ValueError):
    pass


PRESETS = {
    "nelson-coherent-d1": {
        "model": "nelson",
        "dispersion": {"preset": "massless"},
        "chi": {"preset": "one"},
        "potential_u": {"preset": "zero"},
        "family": {"kind": "coherent",
                   "z0": {"amplitude": 0.5, "width": 1.0, "phase": 0.3}},
        "mode_grid": {"type": "line", "k_min": 0.3927, "k_max": 3.1416,
                      "count": 7, "polarized": False},
        "particle_grid": {"dimension": 1, "points": 64, "box": 16.0,
                          "boundary": "periodic"},
        "sweep": {"eps0": 0.4, "count": 4, "ratio": 0.5},
        "corpus": {"size": 4},
        "resolvent_mode": "strong",
        "seed": 1001,
    },
    "nelson-excited-d1": {
        "include": "nelson-coherent-d1",
        "family": {"kind": "excited_coherent",
                   "z0": {"amplitude": 0.5, "width": 1.0, "phase": 0.3},
                   "g": {"amplitude": 0.05, "width": 0.5}},
        "seed": 1002,
    },
    "nelson-confined-d1": {
        "include": "nelson-excited-d1",
        "potential_u": {"preset": "harmonic", "strength": 1.0},
        "particle_grid": {"dimension": 1, "points": 256, "box": 16.0,
                          "boundary": "dirichlet"},
        "resolvent_mode": "both",
        "seed": 1003,
    },
    "pf-excited-d1": {
        "model": "pauli_fierz",
        "dispersion": {"preset": "massless"},
        "chi": {"preset": "one"},
        "potential_u": {"preset": "zero"},
        "family": {"kind": "excited_coherent",
                   "z0": {"amplitude": 0.4, "width": 1.0, "phase": 0.25},
                   "g": {"amplitude": 0.04, "width": 0.5}},
        "mode_grid": {"type": "line", "k_min": 0.5236, "k_max": 4.1888,
                      "count": 7, "polarized": True},
        "particle_grid": {"dimension": 1, "points": 48, "box": 12.0,
                          "boundary": "periodic", "spinor_dim": 2},
        "sweep": {"eps0": 0.4, "count": 4, "ratio": 0.5},
        "corpus": {"size": 4},
        "resolvent_mode": "strong",
        "seed": 2001,
    },
    "pf-wick-shells": {
        "include": "pf-excited-d1",
        "family": {"kind": "coherent",
                   "z0": {"amplitude": 0.1, "width": 1.0}},
        "mode_grid": {"type": "shells", "r_min": 0.05, "r_max": 12.0,
                      "count": 300, "polarized": True},
        "particle_grid": {"dimension": 1, "points": 16, "box": 12.0,
                          "boundary": "periodic", "spinor_dim": 2},
        "uv_schedules": ["half", "inverse"],
        "seed": 2002,
    },
    "uv-nelson-d1": {
        "include": "nelson-excited-d1",
        "family": {"kind": "excited_coherent",
                   "z0": {"amplitude": 0.5, "width": 0.35},
                   "g": {"amplitude": 0.15, "width": 0.5}},
        "mode_grid": {"type": "line", "k_min": 0.2618, "k_max": 12.5664,
                      "count": 23, "polarized": False},
        "particle_grid": {"dimension": 1, "points": 64, "box": 12.0,
                          "boundary": "periodic"},
        "uv_schedules": ["quarter", "half"],
        "seed": 3001,
    },
    "lorentz-default": {
        "model": "nelson",
        "lorentz": {"grid_sizes": [16, 24, 32], "box": 8.0,
                    "weak_norm_points": 64, "corpus_size": 5},
        "seed": 4001,
    },
}

UV_SCHEDULE_EXPONENTS = {"quarter": 0.25, "half": 0.5, "inverse": 1.0}


def load_config(source) -> dict:
    """Load a config dict or JSON file and resolve its include chain."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    else:
        raw = copy.deepcopy(source)
    seen = []
    resolved = {}
    layer = raw
    while True:
        name = layer.pop("include", None)
        stack = layer
        for key, val in stack.items():
            resolved.setdefault(key, val)
        if name is None:
            break
        if name in seen:
            raise ConfigError(f"circular include {name!r}")
        seen.append(name)
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}")
        layer = copy.deepcopy(PRESETS[name])
    if "seed" not in resolved:
        raise ConfigError("config must carry a seed")
    return resolved


# ---------------------------------------------------------------------------
# builders


def build_mode_basis(cfg: dict) -> ModeBasis:
    mg = cfg.get("mode_grid")
    if mg is None:
        raise ConfigError("config lacks a mode_grid section")
    kind = mg.get("type")
    polarized = bool(mg.get("polarized", False))
    if kind == "line":
        basis = line_modes(mg["k_min"], mg["k_max"], mg["count"])
        if polarized:
            basis = ModeBasis(
                np.vstack([basis.k_points] * 2),
                np.concatenate([basis.cell_measures] * 2), basis.dimension,
                np.concatenate([np.ones(basis.size, int), np.full(basis.size, 2)]))
        return basis
    if kind == "ball":
        return ball_modes(mg["radius"], mg["points_per_axis"],
                          mg.get("dimension", 3), polarized=polarized)
    if kind == "shells":
        return radial_shell_modes(mg["r_min"], mg["r_max"], mg["count"],
                                  polarized=polarized)
    raise ConfigError(f"unknown mode_grid type {kind!r}")


def build_dispersion(cfg: dict, basis: ModeBasis) -> Dispersion:
    d = cfg.get("dispersion", {"preset": "massless"})
    if d["preset"] == "massless":
        return Dispersion.massless(basis)
    if d["preset"] == "massive":
        return Dispersion.massive(basis, d.get("mass", 1.0))
    raise ConfigError(f"unknown dispersion preset {d['preset']!r}")


def dispersion_fn(cfg: dict):
    d = cfg.get("dispersion", {"preset": "massless"})
    if d["preset"] == "massless":
        return lambda r: np.asarray(r, dtype=float)
    mass = d.get("mass", 1.0)
    return lambda r: np.sqrt(np.asarray(r, dtype=float) ** 2 + mass ** 2)


def _profile(basis: ModeBasis, spec: dict | None) -> np.ndarray | None:
    if spec is None:
        return None
    amp = spec.get("amplitude", 0.0)
    width = spec.get("width", 1.0)
    phase = spec.get("phase", 0.0)
    vals = amp * np.exp(-width * basis.k_norms ** 2)
    if phase:
        vals = vals * np.exp(1j * phase * basis.k_points[:, 0])
    return vals


def build_family_from_config(cfg: dict, basis: ModeBasis, dispersion: Dispersion):
    spec = cfg.get("family")
    if spec is None:
        raise ConfigError("config lacks a family section")
    kind = spec.get("kind")
    grade = spec.get("grade", "pf")
    z0 = _profile(basis, spec.get("z0"))
    g = _profile(basis, spec.get("g"))
    squeeze = _profile(basis, spec.get("squeeze"))
    squeeze = None if squeeze is None else np.real(squeeze)
    return build_family(kind, basis, dispersion, z0=z0, g=g, squeeze=squeeze,
                        grade=grade)


def build_coupling(cfg: dict, basis: ModeBasis, dispersion: Dispersion,
                   verify: bool = True) -> pots.CouplingSpec:
    chi = cfg.get("chi", {"preset": "one"})
    kind = "nelson_scalar" if cfg.get("model", "nelson") == "nelson" else "pf_vector"
    return pots.make_coupling(basis, dispersion, kind, chi.get("preset", "one"),
                              cutoff=chi.get("cutoff"), width=chi.get("width"),
                              verify=verify, omega_fn=dispersion_fn(cfg))


def build_particle_grid(cfg: dict) -> ParticleGrid:
    pg = cfg.get("particle_grid")
    if pg is None:
        raise ConfigError("config lacks a particle_grid section")
    return ParticleGrid(pg.get("dimension", 1), pg["points"], pg["box"],
                        pg.get("boundary", "periodic"), pg.get("spinor_dim", 1))


def build_external_potential(cfg: dict, grid: ParticleGrid) -> ExternalPotential:
    spec = cfg.get("potential_u", {"preset": "zero"})
    pts = grid.points()
    preset = spec.get("preset", "zero")
    if preset == "zero":
        vals = np.zeros(grid.npoints)
    elif preset == "harmonic":
        vals = spec.get("strength", 1.0) * np.sum(pts ** 2, axis=1)
    elif preset == "coulomb_regularized":
        r = np.sqrt(np.sum(pts ** 2, axis=1) + spec.get("core", 0.5) ** 2)
        vals = -spec.get("charge", 1.0) / r
    elif preset == "custom_table":
        xs = np.asarray(spec["x"], dtype=float)
        vs = np.asarray(spec["values"], dtype=float)
        vals = np.interp(pts[:, 0], xs, vs)
    else:
        raise ConfigError(f"unknown potential_u preset {preset!r}")
    return ExternalPotential.from_values(vals)


def sweep_epsilons(cfg: dict) -> tuple:
    sw = cfg.get("sweep", {"eps0": 0.4, "count": 4, "ratio": 0.5})
    eps0, count, ratio = sw.get("eps0", 0.4), sw.get("count", 4), sw.get("ratio", 0.5)
    if not (0 < ratio < 1 and 0 < eps0 < 1 and count >= 1):
        raise ConfigError("sweep needs eps0, ratio in (0,1) and count >= 1")
    return tuple(eps0 * ratio ** n for n in range(count))


def build_plan(cfg: dict, verify: bool = True) -> SweepPlan:
    basis = build_mode_basis(cfg)
    dispersion = build_dispersion(cfg, basis)
    family = build_family_from_config(cfg, basis, dispersion)
    coupling = build_coupling(cfg, basis, dispersion, verify=verify)
    grid = build_particle_grid(cfg)
    u_pot = build_external_potential(cfg, grid)
    return SweepPlan(cfg.get("model", "nelson"), family, coupling, grid, u_pot,
                     sweep_epsilons(cfg), seed=int(cfg["seed"]),
                     corpus_size=cfg.get("corpus", {}).get("size", 4))


def uv_schedules(cfg: dict) -> dict:
    names = cfg.get("uv_schedules", ["quarter", "half"])
    out = {}
    for name in names:
        if name not in UV_SCHEDULE_EXPONENTS:
            raise ConfigError(f"unknown uv schedule {name!r}")
        expo = UV_SCHEDULE_EXPONENTS[name]
        out[name] = (lambda e, expo=expo: e ** -expo)
    return out


def schedule_expected_bounded(name: str) -> bool:
    return UV_SCHEDULE_EXPONENTS[name] <= 0.5 + 1e-12
