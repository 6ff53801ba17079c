"""Run configuration: JSON documents validated with pydantic.

Complex matrices are nested lists whose leaves are [re, im] pairs, so a
value round-trips bit-exactly through the file.
"""
import json
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

Matrix = list[list[tuple[float, float]]]
Rates = Union[float, list[float]]
Path = tuple[int, int]


class ConfigError(ValueError):
    pass


def to_array(m):
    a = np.asarray(m, dtype=float)
    if a.ndim != 3 or a.shape[-1] != 2:
        raise ConfigError("matrix must be a 2-D array of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def from_array(a):
    a = np.asarray(a, dtype=np.complex128)
    return [[(float(z.real), float(z.imag)) for z in row] for row in a]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SnapModelConfig(_Strict):
    type: Literal["snap"]
    d_A: int = Field(4, ge=2)
    N: int = Field(2, ge=1)
    phases: Optional[list[float]] = None
    omega: float = 1.0
    chi: float = 0.5
    H1: Optional[Matrix] = None
    H2: Optional[Matrix] = None
    kappa: Rates = 0.02
    gamma: Rates = 0.02
    gate_time: Optional[float] = Field(None, gt=0)
    picture: Literal["interaction", "schrodinger"] = "interaction"


class ErrorTransparentModelConfig(_Strict):
    type: Literal["error_transparent"]
    d_A: int = Field(3, ge=2)
    d_B: int = Field(2, ge=1)
    hamiltonians: Optional[list[Matrix]] = None
    gammas: Rates = 0.02
    gate_time: float = Field(1.0, gt=0)


class JumpConfig(_Strict):
    label: str
    matrix: Matrix


class ExplicitModelConfig(_Strict):
    type: Literal["explicit"]
    d_A: int = Field(ge=1)
    d_B: int = Field(ge=1)
    representatives: Optional[list[Matrix]] = None
    anchor: int = 1
    hamiltonian: Matrix
    jumps: list[JumpConfig] = []
    edges: Optional[list[Path]] = None
    frame: Optional[list[Matrix]] = None
    gate_time: float = Field(1.0, gt=0)


ModelConfig = Annotated[
    Union[SnapModelConfig, ErrorTransparentModelConfig, ExplicitModelConfig],
    Field(discriminator="type")]


class _Check(_Strict):
    name: Optional[str] = None


class CocycleCheck(_Check):
    kind: Literal["cocycle"]
    tol: float = Field(1e-12, gt=0)


class ClosureCheck(_Check):
    kind: Literal["closure"]
    expect_closed: bool = True


class Lemma1Check(_Check):
    kind: Literal["lemma1"]
    samples: int = Field(10, ge=1)
    tol: float = Field(1e-8, gt=0)


class Lemma3Check(_Check):
    kind: Literal["lemma3"]
    samples: int = Field(5, ge=1)
    tol: float = Field(1e-7, gt=0)


class XiCheckConfig(_Check):
    kind: Literal["xi"]
    samples: int = Field(10, ge=1)
    tol: float = Field(1e-9, gt=0)
    t: Optional[float] = None


class Theorem1Check(_Check):
    kind: Literal["theorem1"]
    expect_exact: bool = True
    spot_checks: int = Field(3, ge=0)


class PiOrderCheck(_Check):
    kind: Literal["pi_order"]
    paths: Optional[list[Path]] = None
    pmax: Optional[int] = Field(None, ge=1)
    expect: Optional[dict[str, Union[int, Literal["EXACT", "UNREACHABLE"]]]] = None
    schrodinger: bool = False


class EtConditionCheck(_Check):
    kind: Literal["et_condition"]
    expect: Optional[list[bool]] = None


class NasCheck(_Check):
    kind: Literal["nas"]
    expect: Optional[list[list[int]]] = None


CheckConfig = Annotated[
    Union[CocycleCheck, ClosureCheck, Lemma1Check, Lemma3Check, XiCheckConfig, Theorem1Check,
          PiOrderCheck, EtConditionCheck, NasCheck],
    Field(discriminator="kind")]


class NumericsConfig(_Strict):
    pass_tol: float = Field(1e-7, gt=0)
    fail_tol: float = Field(1e-4, gt=0)
    zero_tol: float = Field(1e-10, gt=0)
    membership_tol: float = Field(1e-9, gt=0)
    gate_tol: float = Field(1e-8, gt=0)
    steps: int = Field(4000, ge=1)
    pmax: int = Field(6, ge=1)
    times: Optional[list[float]] = None
    n_times: int = Field(3, ge=1)

    @model_validator(mode="after")
    def _tol_order(self):
        if self.pass_tol >= self.fail_tol:
            raise ValueError("pass_tol must be below fail_tol")
        if self.times is not None and any(t <= 0 for t in self.times):
            raise ValueError("times must be positive")
        return self


class OutputConfig(_Strict):
    report: Optional[str] = "report.json"
    csv: Optional[str] = "csv"
    seed: int = Field(0, ge=0, lt=2 ** 64)


class RunConfig(_Strict):
    model: ModelConfig
    checks: list[CheckConfig] = []
    numerics: NumericsConfig = NumericsConfig()
    output: OutputConfig = OutputConfig()

    @property
    def d_A(self):
        return self.model.d_A

    @model_validator(mode="after")
    def _consistency(self):
        dA = self.model.d_A
        m = self.model
        if isinstance(m, ExplicitModelConfig):
            for e in m.edges or []:
                _check_path(e, dA, "edge")
            if not 1 <= m.anchor <= dA:
                raise ValueError(f"anchor {m.anchor} outside [1, {dA}]")
        for c in self.checks:
            if isinstance(c, PiOrderCheck):
                for p in c.paths or []:
                    _check_path(p, dA, "path")
                for key in c.expect or {}:
                    _check_path(parse_path_key(key), dA, "expected path")
            if isinstance(c, EtConditionCheck) and not isinstance(m, ErrorTransparentModelConfig):
                raise ValueError("et_condition needs an error_transparent model")
            if isinstance(c, NasCheck) and isinstance(m, ExplicitModelConfig) and m.frame is None:
                raise ValueError("nas needs a frame for explicit models")
        names = [check_name(c, k) for k, c in enumerate(self.checks)]
        if len(set(names)) != len(names):
            raise ValueError("check names must be unique")
        return self


def _check_path(p, dA, what):
    if not all(1 <= x <= dA for x in p):
        raise ValueError(f"{what} {tuple(p)} outside [1, {dA}]")


def parse_path_key(key):
    """'1->4' -> (1, 4)."""
    try:
        a, b = key.split("->")
        return int(a), int(b)
    except ValueError:
        raise ValueError(f"path key {key!r} must look like '1->4'") from None


def check_name(check, index):
    return check.name or f"{index + 1:02d}_{check.kind}"


def _line_col(text, pos):
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _drop(data, loc):
    node = data
    for key in loc[:-1]:
        node = node[key]
    if isinstance(node, dict):
        node.pop(loc[-1], None)


def parse_config(text, strict=True, warn=None):
    """Validate a JSON document.  Without `strict`, unknown keys are dropped and reported via `warn`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    for _ in range(100):
        try:
            return RunConfig.model_validate(data)
        except ValidationError as exc:
            errs = exc.errors()
            extra = [e for e in errs if e["type"] == "extra_forbidden"]
            if strict or len(extra) != len(errs):
                lines = [f"{'.'.join(str(x) for x in e['loc']) or '<root>'}: {e['msg']}" for e in errs]
                raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines)) from None
            for e in extra:
                if warn is not None:
                    warn(f"ignoring unknown key {'.'.join(str(x) for x in e['loc'])}")
                _drop(data, _strip_tags(e["loc"]))
    raise ConfigError("could not strip unknown keys")


def _strip_tags(loc):
    # pydantic inserts the discriminator value into union locations
    return tuple(x for x in loc if not (isinstance(x, str) and x in _TAGS))


_TAGS = {"snap", "error_transparent", "explicit", "cocycle", "closure", "lemma1", "lemma3", "xi",
         "theorem1", "pi_order", "et_condition", "nas"}


def load_config(path, strict=True, warn=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, strict, warn)


def dump_config(cfg):
    """Canonical JSON echo with defaults filled; loading it back reproduces it byte for byte."""
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=False) + "\n"
