"""Experiment configuration schema.

A config is a single nested YAML or JSON document. Validation is strict:
unknown keys are rejected, registry names and their parameters are checked
against :mod:`registry`, and every tolerance must be positive.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator, model_validator

from . import registry
from .errors import ConfigError

Positive = Annotated[float, Field(gt=0)]
Count = Annotated[int, Field(ge=1)]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Ref(Strict):
    """A registry entry: ``name`` or ``{name: ..., params: {...}}``."""

    name: str
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _from_string(cls, v):
        return {"name": v} if isinstance(v, str) else v


def _checked(ref: Ref, table: str, supplied=()) -> Ref:
    for key in supplied:
        if key in ref.params:
            raise ValueError(f"'{key}' is set by the experiment, not in {table} params")
    try:
        registry.resolve(table, ref.name, ref.params, supplied)
    except (KeyError, TypeError) as exc:
        raise ValueError(exc.args[0]) from None
    return ref


class Output(Strict):
    dir: str | None = None
    formats: list[Literal["json", "csv"]] = ["json"]


class Base(Strict):
    seed: int = 0
    output: Output = Output()


# ---------------------------------------------------------------- per-kind schemas


class GeometryTolerances(Strict):
    closed_form: Positive = 1e-6
    eigen: Positive = 1e-6
    torsion: Positive = 1e-8
    differential: Positive = 1e-5
    commutator: Positive = 1e-4
    positivity: Positive = 1e-12


class GeometryVerifyConfig(Base):
    kind: Literal["geometry-verify"]
    metric: Ref = Ref(name="hopf", params={"n": 2})
    points: Count = 100
    differential_points: Count = 20
    commutator_points: Count = 20
    weights: list[Ref] = [Ref(name="zero"), Ref(name="norm2"), Ref(name="two_re_z1")]
    fd_step: Positive = 1e-4
    tolerances: GeometryTolerances = GeometryTolerances()

    @field_validator("metric")
    @classmethod
    def _metric(cls, v):
        return _checked(v, "metric")

    @field_validator("weights")
    @classmethod
    def _weights(cls, v):
        for w in v:
            _checked(w, "weight", ("n",))
        return v


class InterpolationSpec(Strict):
    instances: Count = 100
    samples: Count = 100
    tol: Positive = 1e-12


class DFSweepConfig(Base):
    kind: Literal["df-sweep"]
    domain: Ref = Ref(name="product", params={"n": 2})
    etas: list[Annotated[float, Field(ge=0, le=1)]] = [round(0.05 * i, 10) for i in range(21)]
    psd_tol: Positive = 1e-8
    refine: bool = False
    interpolation: InterpolationSpec | None = None

    @field_validator("domain")
    @classmethod
    def _domain(cls, v):
        return _checked(v, "df-domain", ("seed",))


BKMKH_METRICS = ("euclidean", "hopf")


class BKMKHConfig(Base):
    kind: Literal["bkmkh"]
    metric: Ref = Ref(name="euclidean", params={"n": 2})
    resolutions: list[Count] = [16, 32, 48]
    residual_tol: Positive = 1e-2

    @field_validator("metric")
    @classmethod
    def _metric(cls, v):
        _checked(v, "metric")
        if v.name not in BKMKH_METRICS or v.params.get("n", 2) != 2:
            raise ValueError(f"twisted-identity test cases exist for {BKMKH_METRICS} with n = 2 only")
        return v

    @field_validator("resolutions")
    @classmethod
    def _increasing(cls, v):
        if len(v) < 2 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("resolutions must be strictly increasing, at least two")
        return v


def _planar(v: Ref) -> Ref:
    return _checked(v, "planar-domain", ("resolution",))


def _planar_weight(v: Ref | None) -> Ref | None:
    return None if v is None else _checked(v, "weight", ("n",))


S = Annotated[float, Field(gt=0, lt=0.5)]


class BergmanTolerances(Strict):
    laws: Positive = 1e-8
    boas_straube: Positive = 1e-6
    truncation: Positive = 1e-2


class BergmanConfig(Base):
    kind: Literal["bergman"]
    domain: Ref = Ref(name="disc")
    resolution: Count = 256
    s_values: list[S] = [0.1, 0.2, 0.3, 0.4]
    degree: Count = 25
    slack: Annotated[float, Field(ge=0)] = 0.1
    weight: Ref | None = None
    tolerances: BergmanTolerances = BergmanTolerances()

    _domain = field_validator("domain")(lambda cls, v: _planar(v))
    _weight = field_validator("weight")(lambda cls, v: _planar_weight(v))


class TwistedTolerances(Strict):
    residual: Positive = 1e-2
    orthogonality: Positive = 1e-8


class TwistedConfig(Base):
    kind: Literal["twisted"]
    domain: Ref = Ref(name="disc")
    resolution: Count = 128
    s_values: list[S] = [0.1, 0.25]
    source: Ref = Ref(name="one")
    degree: Count = 25
    slack: Annotated[float, Field(ge=0)] = 0.1
    weight: Ref | None = None
    tolerances: TwistedTolerances = TwistedTolerances()

    _domain = field_validator("domain")(lambda cls, v: _planar(v))
    _weight = field_validator("weight")(lambda cls, v: _planar_weight(v))
    _source = field_validator("source")(lambda cls, v: _checked(v, "source"))


class DetrazTolerances(Strict):
    stability: Positive = 0.05
    growth: Positive = 0.1


class DetrazConfig(Base):
    kind: Literal["detraz"]
    domain: Ref = Ref(name="square")
    s: S = 0.25
    max_power: Count = 30
    resolutions: list[Count] = [256, 384]
    tolerances: DetrazTolerances = DetrazTolerances()

    _domain = field_validator("domain")(lambda cls, v: _planar(v))


ExperimentConfig = Annotated[
    Union[GeometryVerifyConfig, DFSweepConfig, BKMKHConfig, BergmanConfig, TwistedConfig, DetrazConfig],
    Field(discriminator="kind"),
]
KINDS = ("geometry-verify", "df-sweep", "bkmkh", "bergman", "twisted", "detraz")
_ADAPTER = TypeAdapter(ExperimentConfig)


def _errors(exc: ValidationError) -> list[dict]:
    return [{"loc": [str(p) for p in e["loc"]], "msg": e["msg"]} for e in exc.errors()]


def parse_config(data: Any):
    """Validate a mapping into the config model for its ``kind``.

    Raises
    ------
    ConfigError
        With ``details`` holding one ``{loc, msg}`` record per violation.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", details=[])
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as exc:
        details = _errors(exc)
        raise ConfigError("; ".join(f"{'.'.join(d['loc'])}: {d['msg']}" for d in details), details=details) from None


def load_config(path: str | Path):
    """Read YAML or JSON (by suffix; YAML otherwise) and validate."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", details=[]) from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config: {exc}", details=[]) from None
    return parse_config(data)


def default_config(kind: str):
    return parse_config({"kind": kind})


def with_overrides(cfg, seed: int | None = None, slack: float | None = None):
    """Apply CLI overrides, re-validating the result."""
    data = cfg.model_dump(mode="json")
    if seed is not None:
        data["seed"] = seed
    if slack is not None:
        if "slack" not in data:
            raise ConfigError(f"--slack does not apply to kind '{cfg.kind}'", details=[])
        data["slack"] = slack
    return parse_config(data)
