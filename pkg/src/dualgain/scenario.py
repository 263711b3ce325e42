"""JSON scenarios: schema validation and construction of the parameter objects."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .brownian import BrownianControl, BrownianParams
from .inversion import InversionControl
from .mc import MCConfig
from .model import (
    Deterministic,
    DualModelParams,
    Erlang,
    Exponential,
    HyperExponential,
    LatticeParams,
    NoAdditiveGain,
)
from .transforms import SeriesControl


class ScenarioError(ValueError):
    """The scenario file is not valid JSON or violates the schema."""


def load_schema() -> dict:
    text = resources.files("dualgain").joinpath("scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _interarrival(spec: dict):
    kind = spec["kind"]
    if kind == "exponential":
        return Exponential(spec["rate"])
    if kind == "erlang":
        return Erlang(spec["shape"], spec["rate"])
    if kind == "deterministic":
        return Deterministic(spec["d"])
    return HyperExponential(tuple(spec["weights"]), tuple(spec["rates"]))


def _pick(section: dict, names) -> dict:
    return {k: section[k] for k in names if k in section}


@dataclass(frozen=True)
class Scenario:
    raw: dict
    sha256: str
    name: str = ""
    model: DualModelParams | None = None
    lattice: LatticeParams | None = None
    brownian: BrownianParams | None = None
    series: SeriesControl = SeriesControl()
    inversion: InversionControl = InversionControl()
    brownian_control: BrownianControl = BrownianControl()
    mc: MCConfig = MCConfig()
    outputs: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.mc.seed

    def require(self, section: str):
        value = getattr(self, section)
        if value is None:
            raise ScenarioError(f"scenario has no '{section}' section")
        return value

    def x_grid(self, default=None) -> np.ndarray:
        spec = self.outputs.get("x", default)
        if spec is None:
            raise ScenarioError("outputs.x is required for this command")
        if isinstance(spec, dict):
            return np.linspace(spec["start"], spec["stop"], spec["num"])
        return np.asarray(spec, dtype=float)

    def s_grid(self) -> np.ndarray:
        spec = self.outputs.get("s")
        if spec is None:
            return default_s_grid()
        return np.array([complex(*v) if isinstance(v, list) else complex(v) for v in spec])

    @property
    def alpha(self) -> float:
        return float(self.outputs.get("alpha", 0.0))

    def with_paths(self, paths: int | None) -> "Scenario":
        return self if paths is None else replace(self, mc=replace(self.mc, paths=paths))

    def with_workers(self, workers: int) -> "Scenario":
        return replace(self, mc=replace(self.mc, workers=workers))


def default_s_grid() -> np.ndarray:
    """Ten real and ten complex points in the right half plane."""
    real = np.geomspace(0.05, 8.0, 10)
    cplx = np.geomspace(0.1, 6.0, 10) + 1j * np.linspace(0.5, 5.0, 10)
    return np.concatenate([real.astype(complex), cplx])


def parse(data: dict, sha256: str = "") -> Scenario:
    """Validate ``data`` and build every section eagerly."""
    validator = jsonschema.Draft202012Validator(load_schema())
    error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if error is not None:
        where = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {error.message}")

    kw: dict = {"raw": data, "sha256": sha256, "name": data.get("name", "")}
    model = data.get("model")
    if model is not None:
        kw["model"] = DualModelParams(
            a=float(model["a"]),
            mu=NoAdditiveGain if model["mu"] == "none" else float(model["mu"]),
            interarrival=_interarrival(model["interarrival"]),
            mixture_p=float(model.get("mixture_p", 1.0)),
            delta=model.get("delta"),
        )
    for section, cls in (("lattice", LatticeParams), ("brownian", BrownianParams)):
        spec = data.get(section)
        if spec is None:
            continue
        spec = dict(spec)
        if "a" not in spec:
            if model is None:
                raise ScenarioError(f"{section}/a: required when there is no model section")
            spec["a"] = model["a"]
        kw[section] = cls(**spec)
    numerics = data.get("numerics", {})
    kw["series"] = SeriesControl(**numerics.get("series", {}))
    kw["inversion"] = InversionControl(**numerics.get("inversion", {}))
    kw["brownian_control"] = BrownianControl(**numerics.get("brownian", {}))
    kw["mc"] = MCConfig(**data.get("mc", {}))
    kw["outputs"] = dict(data.get("outputs", {}))
    kw["compare"] = dict(data.get("compare", {}))
    return Scenario(**kw)


def load(path: str | Path) -> Scenario:
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: malformed JSON: {exc}") from exc
    return parse(data, hashlib.sha256(raw).hexdigest())


__all__ = ["Scenario", "ScenarioError", "load", "parse", "load_schema", "default_s_grid"]
