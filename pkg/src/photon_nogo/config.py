"""YAML run configuration: model spec plus per-experiment sections.

Schema (``model`` is required, the other sections fall back to defaults)::

    model:
      n_atoms: 2
      n_modes: 2
      species: two_level_shared      # linear_oscillator | two_level_shared | two_level_per_mode
      couplings: [1.0, 1.0]
      coupling_scaling: fixed        # fixed | inverse_sqrt_n
      mode_functions:
        kind: random                 # random | uniform | explicit
        real: [[...]]                # explicit only, n_modes rows x n_atoms columns
        imag: [[...]]
      detuning_schedule:
        - {t_start: 0.0, t_end: 1.0, delta: [0.0, 0.0]}
      t0: 0.0
      t1: 1.0
      rng_seed: 0                    # optional
    input:                           # two-photon input state
      alpha1: 0.7071067811865476     # number or [re, im]
      beta1: 0.7071067811865476
      k1: 0
      alpha2: 0.7071067811865476
      beta2: 0.7071067811865476
      k2: 1
    sweep:
      parameter: n_atoms             # n_atoms | coupling | duration | rng_seed
      values: [1, 2, 4, 8, 16]
    dyson:
      n_steps: 64
      ladder: [16, 32, 64, 128]
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .model import (
    CouplingScaling,
    DetuningSegment,
    ModeFunctionKind,
    ModelSpec,
    Species,
    resolve_mode_functions,
)

MODEL_KEYS = {
    "n_atoms", "n_modes", "species", "couplings", "coupling_scaling",
    "mode_functions", "detuning_schedule", "t0", "t1", "rng_seed",
}
REQUIRED_MODEL_KEYS = MODEL_KEYS - {"rng_seed"}
SWEEP_PARAMETERS = ("n_atoms", "coupling", "duration", "rng_seed")

_HALF = 1 / math.sqrt(2)
DEFAULT_INPUT = {"alpha1": _HALF, "beta1": _HALF, "k1": 0, "alpha2": _HALF, "beta2": _HALF, "k2": 1}
DEFAULT_SWEEP = {"parameter": "n_atoms", "values": [1, 2, 4, 8, 16]}
DEFAULT_DYSON = {"n_steps": 64, "ladder": [16, 32, 64, 128]}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InputState:
    alpha1: complex
    beta1: complex
    k1: int
    alpha2: complex
    beta2: complex
    k2: int

    def as_args(self) -> tuple:
        return (self.alpha1, self.beta1, self.k1, self.alpha2, self.beta2, self.k2)


@dataclass(frozen=True)
class RunConfig:
    spec: ModelSpec
    input: InputState
    sweep: dict = field(default_factory=lambda: dict(DEFAULT_SWEEP))
    dyson: dict = field(default_factory=lambda: dict(DEFAULT_DYSON))


def _complex(value, name: str) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(f"{name}: complex numbers are written as [re, im]")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number or [re, im], got {value!r}")
    return complex(value)


def _dump_complex(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def spec_from_dict(d: dict) -> ModelSpec:
    if not isinstance(d, dict):
        raise ConfigError("'model' must be a mapping")
    missing = REQUIRED_MODEL_KEYS - d.keys()
    if missing:
        raise ConfigError(f"model section is missing: {', '.join(sorted(missing))}")
    unknown = d.keys() - MODEL_KEYS
    if unknown:
        raise ConfigError(f"unknown model keys: {', '.join(sorted(unknown))}")
    try:
        n_atoms, n_modes = int(d["n_atoms"]), int(d["n_modes"])
        seed = int(d.get("rng_seed", 0))
        mf = d["mode_functions"]
        if isinstance(mf, str):
            mf = {"kind": mf}
        kind = ModeFunctionKind(mf.get("kind", "explicit"))
        if kind is ModeFunctionKind.EXPLICIT:
            f = np.asarray(mf["real"], dtype=float) + 1j * np.asarray(mf.get("imag", 0.0), dtype=float)
        else:
            f = resolve_mode_functions(kind, n_modes, n_atoms, seed)
        segments = tuple(
            DetuningSegment(float(s["t_start"]), float(s["t_end"]), tuple(float(x) for x in s["delta"]))
            for s in d["detuning_schedule"]
        )
        return ModelSpec(
            n_atoms=n_atoms,
            n_modes=n_modes,
            species=Species(d["species"]),
            couplings=tuple(float(g) for g in d["couplings"]),
            coupling_scaling=CouplingScaling(d["coupling_scaling"]),
            mode_functions=f,
            detuning_schedule=segments,
            t0=float(d["t0"]),
            t1=float(d["t1"]),
            rng_seed=seed,
            mode_function_kind=kind,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model section: {exc}") from exc


def spec_to_dict(spec: ModelSpec) -> dict:
    mf: dict = {"kind": spec.mode_function_kind.value}
    if spec.mode_function_kind is ModeFunctionKind.EXPLICIT:
        mf["real"] = spec.mode_functions.real.tolist()
        mf["imag"] = spec.mode_functions.imag.tolist()
    return {
        "n_atoms": spec.n_atoms,
        "n_modes": spec.n_modes,
        "species": spec.species.value,
        "couplings": list(spec.couplings),
        "coupling_scaling": spec.coupling_scaling.value,
        "mode_functions": mf,
        "detuning_schedule": [
            {"t_start": s.t_start, "t_end": s.t_end, "delta": list(s.delta)} for s in spec.detuning_schedule
        ],
        "t0": spec.t0,
        "t1": spec.t1,
        "rng_seed": spec.rng_seed,
    }


def _input_from_dict(d: dict) -> InputState:
    merged = {**DEFAULT_INPUT, **(d or {})}
    unknown = merged.keys() - DEFAULT_INPUT.keys()
    if unknown:
        raise ConfigError(f"unknown input keys: {', '.join(sorted(unknown))}")
    return InputState(
        alpha1=_complex(merged["alpha1"], "input.alpha1"),
        beta1=_complex(merged["beta1"], "input.beta1"),
        k1=int(merged["k1"]),
        alpha2=_complex(merged["alpha2"], "input.alpha2"),
        beta2=_complex(merged["beta2"], "input.beta2"),
        k2=int(merged["k2"]),
    )


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict) or "model" not in raw:
        raise ConfigError("configuration needs a 'model' section")
    unknown = raw.keys() - {"model", "input", "sweep", "dyson"}
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    sweep = {**DEFAULT_SWEEP, **(raw.get("sweep") or {})}
    if sweep["parameter"] not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}")
    if not sweep["values"]:
        raise ConfigError("sweep.values must be non-empty")
    dyson = {**DEFAULT_DYSON, **(raw.get("dyson") or {})}
    return RunConfig(
        spec=spec_from_dict(raw["model"]),
        input=_input_from_dict(raw.get("input")),
        sweep=sweep,
        dyson=dyson,
    )


def config_to_dict(cfg: RunConfig) -> dict:
    inp = cfg.input
    return {
        "model": spec_to_dict(cfg.spec),
        "input": {
            "alpha1": _dump_complex(inp.alpha1), "beta1": _dump_complex(inp.beta1), "k1": inp.k1,
            "alpha2": _dump_complex(inp.alpha2), "beta2": _dump_complex(inp.beta2), "k2": inp.k2,
        },
        "sweep": dict(cfg.sweep),
        "dyson": dict(cfg.dyson),
    }


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides; values are parsed as YAML scalars/lists."""
    out = copy.deepcopy(raw)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = yaml.safe_load(value)
    return out


def read_raw(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def load_config(path: str | Path, overrides=()) -> RunConfig:
    return config_from_dict(apply_overrides(read_raw(path), overrides))


def dump_spec(spec: ModelSpec) -> str:
    return yaml.safe_dump({"model": spec_to_dict(spec)}, sort_keys=False)


def load_spec_text(text: str) -> ModelSpec:
    return spec_from_dict(yaml.safe_load(text)["model"])


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
