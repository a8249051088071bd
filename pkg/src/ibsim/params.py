"""Simulation parameters, validation, and the flat key=value config format."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace

from .network import RelationNetwork, gen_ba, gen_complete, gen_er

MODES = ("normal", "transparent", "fast")
RANK_METRICS = ("debtrank", "katz")


class ConfigError(ValueError):
    """Invalid parameter values or config file; carries one message per problem."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class NetworkSpec:
    """Which relation network to generate: complete, er(gamma), or ba(m)."""

    kind: str = "complete"
    gamma: float | None = None
    m: int | None = None

    @staticmethod
    def parse(text: str) -> "NetworkSpec":
        s = text.strip().lower()
        if s == "complete":
            return NetworkSpec("complete")
        match = re.fullmatch(r"er\(([^)]+)\)", s)
        if match:
            return NetworkSpec("er", gamma=float(match.group(1)))
        match = re.fullmatch(r"ba\(([^)]+)\)", s)
        if match:
            return NetworkSpec("ba", m=int(match.group(1)))
        raise ValueError(
            f"unrecognized network kind {text!r}; expected complete, er(<gamma>) or ba(<m>)"
        )

    def label(self) -> str:
        if self.kind == "er":
            return f"er({self.gamma!r})"
        if self.kind == "ba":
            return f"ba({self.m})"
        return "complete"

    def build(self, n_banks: int, seed: int) -> RelationNetwork:
        if self.kind == "complete":
            return gen_complete(n_banks)
        if self.kind == "er":
            return gen_er(n_banks, self.gamma, seed)
        if self.kind == "ba":
            return gen_ba(n_banks, self.m, seed)
        raise ValueError(f"unknown network kind {self.kind!r}")


@dataclass
class SimParams:
    """Full configuration of one simulation run.

    Interest rates r_ib / r_floan are per loan term, r_h / r_fdeposit per
    timestep. invest_fraction is the share of each granted firm loan passed
    to the household; deposit_fraction the share of household inflows saved
    as bank deposits.
    """

    n_banks: int = 100
    n_firms: int = 100
    max_timesteps: int = 500
    tau: int = 10
    r_ib: float = 0.01
    r_floan: float = 0.02
    r_h: float = 0.002
    r_fdeposit: float = 0.002
    dividend_rate: float = 0.2
    loan_request_max: float = 20.0
    invest_fraction: float = 0.8
    deposit_fraction: float = 0.05
    consumption_dispersion: float = 0.5
    firm_return_mean: float = 0.0
    firm_return_sd: float = 0.5
    firm_default_threshold: float = -100.0
    initial_bank_cash: float = 20.0
    initial_firm_cash: float = 10.0
    initial_household_cash: float = 0.0
    mode: str = "normal"
    rank_metric: str = "debtrank"
    network_kind: NetworkSpec = field(default_factory=NetworkSpec)

    def validation_errors(self) -> list[str]:
        errs = []
        if self.n_banks < 2:
            errs.append(f"n_banks must be at least 2, got {self.n_banks}")
        if self.n_firms != self.n_banks:
            errs.append(f"n_firms must equal n_banks, got {self.n_firms} vs {self.n_banks}")
        if self.max_timesteps < 1:
            errs.append(f"max_timesteps must be positive, got {self.max_timesteps}")
        if self.tau < 1:
            errs.append(f"tau must be at least 1, got {self.tau}")
        if not 0 < self.r_ib < self.r_floan:
            errs.append(
                f"need 0 < r_ib < r_floan, got r_ib={self.r_ib}, r_floan={self.r_floan}"
            )
        if self.r_h < 0:
            errs.append(f"r_h must be nonnegative, got {self.r_h}")
        if self.r_fdeposit < 0:
            errs.append(f"r_fdeposit must be nonnegative, got {self.r_fdeposit}")
        if not 0.0 <= self.dividend_rate <= 1.0:
            errs.append(f"dividend_rate must be in [0, 1], got {self.dividend_rate}")
        if self.loan_request_max < 0:
            errs.append(f"loan_request_max must be nonnegative, got {self.loan_request_max}")
        if not 0.0 <= self.invest_fraction <= 1.0:
            errs.append(f"invest_fraction must be in [0, 1], got {self.invest_fraction}")
        if not 0.0 <= self.deposit_fraction <= 1.0:
            errs.append(f"deposit_fraction must be in [0, 1], got {self.deposit_fraction}")
        if self.consumption_dispersion < 0:
            errs.append(
                f"consumption_dispersion must be nonnegative, got {self.consumption_dispersion}"
            )
        if self.firm_return_sd < 0:
            errs.append(f"firm_return_sd must be nonnegative, got {self.firm_return_sd}")
        if self.firm_default_threshold >= 0:
            errs.append(
                f"firm_default_threshold must be negative, got {self.firm_default_threshold}"
            )
        for name in ("initial_bank_cash", "initial_firm_cash", "initial_household_cash"):
            if getattr(self, name) < 0:
                errs.append(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.mode not in MODES:
            errs.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rank_metric not in RANK_METRICS:
            errs.append(f"rank_metric must be one of {RANK_METRICS}, got {self.rank_metric!r}")
        if self.network_kind.kind == "er" and not 0.0 <= (self.network_kind.gamma or 0) <= 1.0:
            errs.append(f"network_kind er gamma must be in [0, 1], got {self.network_kind.gamma}")
        if self.network_kind.kind == "ba" and not 1 <= (self.network_kind.m or 0) < self.n_banks:
            errs.append(
                f"network_kind ba m must satisfy 1 <= m < n_banks, got {self.network_kind.m}"
            )
        return errs

    def validate(self) -> "SimParams":
        errs = self.validation_errors()
        if errs:
            raise ConfigError(errs)
        return self

    def with_overrides(self, **kwargs) -> "SimParams":
        return replace(self, **kwargs)


_FIELD_TYPES = {f.name: f.type for f in fields(SimParams)}


def _coerce(name: str, raw: str):
    if name == "network_kind":
        return NetworkSpec.parse(raw)
    if name in ("mode", "rank_metric"):
        return raw.strip().lower()
    kind = _FIELD_TYPES[name]
    if kind == "int":
        return int(raw)
    return float(raw)


def parse_config(text: str) -> SimParams:
    """Parse the flat `key = value` config document into validated SimParams.

    Blank lines and '#' comments are ignored; unknown keys are an error.
    """
    errs: list[str] = []
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errs.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            errs.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            errs.append(f"line {lineno}: invalid value for {key!r}: {exc}")
    if errs:
        raise ConfigError(errs)
    params = SimParams(**values)
    param_errs = params.validation_errors()
    if param_errs:
        raise ConfigError(param_errs)
    return params


def load_config(path) -> SimParams:
    with open(path) as fh:
        return parse_config(fh.read())
