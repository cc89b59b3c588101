"""Experiment configuration.

A config is a YAML (or JSON) mapping validated against the models below;
unknown keys are rejected. Precedence, lowest first: built-in defaults, the
config file, command-line flags. A run manifest can be passed back as a
config: its ``config`` block is used.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .alda import AldaConfig, BisectConfig
from .bdps import GaConfig
from .errors import InvalidInput

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "METRICS"]

METRICS = ("ser", "cdf", "beampattern", "af", "pd", "similarity", "tradeoff")


class ConfigError(InvalidInput):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChannelCfg(_Strict):
    source: Literal["rayleigh", "file", "identity"] = "rayleigh"
    path: Optional[str] = None
    seed: Optional[int] = None  # defaults to the experiment seed

    @model_validator(mode="after")
    def _path_needed(self):
        if self.source == "file" and not self.path:
            raise ValueError("channel.source=file needs channel.path")
        return self


class ReferenceCfg(_Strict):
    kind: Literal["lfm", "widebeam", "file"] = "widebeam"
    path: Optional[str] = None
    lobe: tuple[float, float] = (-20.0, 20.0)

    @model_validator(mode="after")
    def _path_needed(self):
        if self.kind == "file" and not self.path:
            raise ValueError("reference.kind=file needs reference.path")
        if not -90 <= self.lobe[0] < self.lobe[1] <= 90:
            raise ValueError("lobe must satisfy -90 <= lo < hi <= 90")
        return self


class ProblemCfg(_Strict):
    M: int = Field(4, ge=1)
    n_tx: int = Field(32, ge=1)
    n_r: int = Field(8, ge=1)
    P: float = Field(1.0, gt=0)
    eps: float = Field(0.3, ge=0)
    d: Optional[float] = Field(None, ge=0)  # None: max-min design
    channel: ChannelCfg = ChannelCfg()
    reference: ReferenceCfg = ReferenceCfg()

    @field_validator("M")
    @classmethod
    def _pow2(cls, v):
        if v & (v - 1):
            raise ValueError("M must be a power of two")
        return v


class AldaCfg(_Strict):
    z_init_mode: Literal["ones", "reference"] = "ones"
    lambda0: float = Field(0.5, ge=0)
    v0: float = Field(0.5, ge=0)
    mu0: float = Field(10.0, gt=0)
    rho: float = Field(2.0, gt=1)
    mu_max: float = Field(1e10, gt=0)
    max_outer: int = Field(100, ge=1)
    max_bfgs: int = Field(500, ge=1)
    bfgs_memory: int = Field(10, ge=1)
    bfgs_grad_tol: float = Field(1e-6, gt=0)
    feas_tol: float = Field(1e-6, gt=0)
    stall_tol: float = Field(1e-8, gt=0)
    init_perturb: float = Field(1e-3, ge=0)
    n_starts: int = Field(1, ge=1)

    def build(self, seed):
        return AldaConfig(**self.model_dump(), seed=seed)


class BisectCfg(_Strict):
    d_lo: Optional[float] = Field(None, ge=0)
    d_hi: Optional[float] = Field(None, gt=0)
    d_tol: Optional[float] = Field(None, gt=0)
    p_tol: float = Field(1e-3, gt=0)
    max_iter: int = Field(60, ge=1)

    def build(self):
        return BisectConfig(**self.model_dump())


class GaCfg(_Strict):
    pop: int = Field(24, ge=4)
    iters: int = Field(30, ge=0)
    p_mut: float = Field(0.15, ge=0, le=1)
    p_cross: float = Field(0.8, ge=0, le=1)
    elitism: int = Field(2, ge=1)
    tournament: int = Field(3, ge=1)
    objective: Literal["combined", "true"] = "combined"

    def build(self, seed):
        return GaConfig(**self.model_dump(), seed=seed)


class BdpsCfg(_Strict):
    G: int = Field(2, ge=1)
    ga: GaCfg = GaCfg()


class SolverCfg(_Strict):
    method: Literal["alda", "bdps"] = "alda"
    alda: AldaCfg = AldaCfg()
    bisect: BisectCfg = BisectCfg()
    bdps: BdpsCfg = BdpsCfg()


class EvalCfg(_Strict):
    metrics: list[Literal[METRICS]] = ["similarity"]
    signals: Optional[str] = None  # CSV from a previous design run
    snr_db: list[float] = [-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
    trials: int = Field(10_000, ge=1)
    pd_trials: int = Field(1000, ge=1)
    pfa: float = Field(1e-3, gt=0, lt=1)
    calib_trials: int = Field(100_000, ge=1000)
    angle_step: float = Field(0.5, gt=0)
    n_channels: int = Field(20, ge=0)  # ensemble size for the distance CDF
    eta: float = Field(0.0, ge=0)  # CSIT error level, relative to the noise power
    ref_snr_db: float = 4.0


class SweepCfg(_Strict):
    d_values: list[float] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]
    mode: Literal["min_eps", "fixed_eps"] = "min_eps"
    rtol: float = Field(1e-3, gt=0)

    @field_validator("d_values")
    @classmethod
    def _nonneg(cls, v):
        if not v or min(v) < 0:
            raise ValueError("d_values must be a non-empty list of non-negative numbers")
        return v


class ExperimentConfig(_Strict):
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    out: str = "out"
    problem: ProblemCfg = ProblemCfg()
    solver: SolverCfg = SolverCfg()
    eval: EvalCfg = EvalCfg()
    sweep: SweepCfg = SweepCfg()

    @model_validator(mode="after")
    def _consistent(self):
        if self.solver.bdps.ga.elitism >= self.solver.bdps.ga.pop:
            raise ValueError("solver.bdps.ga.elitism must be below pop")
        return self

    def resolved(self):
        """Fully expanded config as plain data."""
        return self.model_dump(mode="json")


def _merge(base, extra):
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Read, merge and validate a config.

    Parameters
    ----------
    path : str or Path, optional
        YAML/JSON file. Relative data paths inside it resolve against the
        file's directory.
    overrides : dict, optional
        Nested values applied on top of the file (command-line flags).
    """
    data = {}
    if path is not None:
        p = Path(path)
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        if "config" in data and "outputs" in data:  # a run manifest
            data = data["config"]
        data = _resolve_paths(data, p.parent)
    data = _merge(data, overrides or {})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_paths(data, root):
    data = _merge({}, data)
    for keys in (("problem", "channel", "path"), ("problem", "reference", "path"),
                 ("eval", "signals")):
        node = data
        for k in keys[:-1]:
            node = node.get(k) if isinstance(node, dict) else None
        if isinstance(node, dict) and isinstance(node.get(keys[-1]), str):
            q = Path(node[keys[-1]])
            if not q.is_absolute():
                node[keys[-1]] = str((root / q).resolve())
    return data
