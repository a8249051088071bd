"""Systemic-risk and efficiency observables computed from run data."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps


@dataclass
class RunRecord:
    """Per-run metric tuple; None marks an undefined or censored value."""

    seed: int
    mode: str
    network: str
    t_fd: int | None
    censored: bool
    losses: float | None
    cascade_size: int | None
    efficiency: float | None
    volume: float | None
    debtrank_profile: list[float] | None

    def to_json_dict(self) -> dict:
        return asdict(self)


def losses(report) -> float:
    """Total bank capital destroyed over the cascade timestep.

    Negative sum of per-bank capital changes between the step boundary before
    the cascade and the moment the cascade resolves.
    """
    return float((report.capital_before - report.capital_after).sum())


def cascade_size(report) -> int:
    """Number of defaulting banks, the trigger included."""
    return len(report.defaulted_banks)


def efficiency(requested: list[float], granted: list[float]) -> float:
    """Time average of (granted / requested) per timestep.

    Timesteps with no requests are skipped; NaN if no timestep had any.
    """
    if len(requested) != len(granted):
        raise ValueError("requested and granted series must be aligned by timestep")
    ratios = [g / r for r, g in zip(requested, granted) if r > 0]
    if not ratios:
        return float("nan")
    return float(np.mean(ratios))


def transaction_volume(events: list[tuple], ref_time: int, tau: int) -> float:
    """IB market volume at the reference step: new loans plus the loans
    issued tau steps earlier (the ones being repaid).

    NaN if the event log does not reach the reference step.
    """
    if not events or max(e[0] for e in events) < ref_time:
        return float("nan")
    total = 0.0
    for t, kind, _a, _b, amount in events:
        if kind == "ib_loan" and (t == ref_time or t == ref_time - tau):
            total += amount
    return total


def summary_stats(values) -> tuple[float, float, float, float]:
    """Sample mean, standard deviation, skewness and non-excess kurtosis.

    Kurtosis uses the Pearson definition (a Gaussian scores 3). Higher
    moments of a constant sample are NaN.
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size < 2:
        raise ValueError(f"need at least 2 values, got {arr.size}")
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    if sd == 0:
        return mean, 0.0, float("nan"), float("nan")
    skew = float(sps.skew(arr))
    kurt = float(sps.kurtosis(arr, fisher=False))
    return mean, sd, skew, kurt


def nan_to_none(x: float | None) -> float | None:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return x
