import math

import numpy as np
import pytest

from ibsim.engine import CascadeReport, ModePolicy, run_simulation
from ibsim.metrics import (
    cascade_size,
    efficiency,
    losses,
    summary_stats,
    transaction_volume,
)
from ibsim.params import SimParams


def report_with(before, after, banks=(0,)):
    return CascadeReport(
        trigger_bank=banks[0],
        defaulted_banks=list(banks),
        t0=7,
        capital_before=np.asarray(before, dtype=float),
        capital_after=np.asarray(after, dtype=float),
    )


class TestLosses:
    def test_no_change_no_loss(self):
        assert losses(report_with([10.0, 20.0], [10.0, 20.0])) == 0.0

    def test_single_bank_loss(self):
        assert losses(report_with([30.0, 20.0], [20.0, 20.0])) == 10.0

    def test_cascade_sums_all_banks(self):
        # mirrors the 3-bank chain: two 30-unit writeoffs
        assert losses(report_with([-30.0, 5.0, 25.0], [-30.0, -25.0, -5.0])) == 60.0


class TestCascadeSize:
    def test_isolated(self):
        assert cascade_size(report_with([1.0], [0.0], banks=(0,))) == 1

    def test_chain(self):
        assert cascade_size(report_with([0] * 3, [0] * 3, banks=(0, 1, 2))) == 3


class TestEfficiency:
    def test_everything_granted(self):
        assert efficiency([10.0, 5.0], [10.0, 5.0]) == 1.0

    def test_nothing_granted(self):
        assert efficiency([10.0, 5.0], [0.0, 0.0]) == 0.0

    def test_half_by_value(self):
        assert efficiency([10.0, 20.0], [5.0, 10.0]) == 0.5

    def test_empty_steps_skipped(self):
        assert efficiency([10.0, 0.0, 10.0], [10.0, 0.0, 0.0]) == 0.5

    def test_undefined_when_no_requests(self):
        assert math.isnan(efficiency([0.0, 0.0], [0.0, 0.0]))

    def test_scale_invariance(self):
        req = [3.0, 8.0, 1.0]
        grant = [1.0, 8.0, 0.5]
        assert efficiency(req, grant) == pytest.approx(
            efficiency([r * 1_000 for r in req], [g * 1_000 for g in grant])
        )

    def test_misaligned_series_rejected(self):
        with pytest.raises(ValueError):
            efficiency([1.0], [1.0, 2.0])


class TestTransactionVolume:
    def test_no_ib_activity(self):
        events = [(100, "interest_h", 0, -1, 0.5)]
        assert transaction_volume(events, 100, 10) == 0.0

    def test_new_loan_only(self):
        events = [(100, "ib_loan", 1, 0, 10.0), (100, "interest_h", 0, -1, 0.0)]
        assert transaction_volume(events, 100, 10) == 10.0

    def test_new_plus_maturing(self):
        events = [
            (90, "ib_loan", 1, 0, 7.0),
            (95, "ib_loan", 2, 0, 99.0),  # neither new nor maturing at T=100
            (100, "ib_loan", 1, 2, 5.0),
        ]
        assert transaction_volume(events, 100, 10) == 12.0

    def test_short_run_undefined(self):
        events = [(42, "ib_loan", 1, 0, 7.0)]
        assert math.isnan(transaction_volume(events, 100, 10))


class TestSummaryStats:
    def test_constant_sample(self):
        mean, sd, skew, kurt = summary_stats([1.0, 1.0, 1.0, 1.0])
        assert mean == 1.0 and sd == 0.0
        assert math.isnan(skew) and math.isnan(kurt)

    def test_two_points(self):
        mean, sd, _, _ = summary_stats([0.0, 2.0])
        assert mean == 1.0
        assert sd == pytest.approx(math.sqrt(2.0))

    def test_gaussian_kurtosis_is_three(self):
        # Monte-Carlo sanity oracle: a large standard-normal sample
        draws = np.random.default_rng(0).standard_normal(1_000_000)
        mean, sd, skew, kurt = summary_stats(draws)
        assert abs(mean) < 0.005
        assert abs(sd - 1.0) < 0.005
        assert abs(skew) < 0.01
        assert abs(kurt - 3.0) < 0.02

    def test_too_few_values(self):
        with pytest.raises(ValueError):
            summary_stats([1.0])


def active_params(n=10):
    return SimParams(
        n_banks=n,
        n_firms=n,
        max_timesteps=120,
        loan_request_max=10.0,
        initial_bank_cash=5.0,
        initial_firm_cash=30.0,
        deposit_fraction=0.15,
        firm_default_threshold=-100.0,
    )


def log_implied_losses(events, t0, params):
    """Double-entry replay: bank-equity deltas per event kind at the cascade step."""
    total = 0.0
    for t, kind, _a, _b, amount in events:
        if t != t0:
            continue
        if kind == "ib_writeoff":
            total += amount
        elif kind == "firm_default":
            total += amount
        elif kind == "firm_estate":
            total -= amount
        elif kind in ("interest_h", "interest_f", "dividend"):
            total += amount
        elif kind == "firm_repay":
            total -= amount - amount / (1.0 + params.r_floan)
        # ib_repay moves interest between two banks; system-wide it cancels
    return total


class TestDoubleEntry:
    def test_losses_match_event_log_replay(self):
        params = active_params()
        checked = 0
        for seed in range(40):
            record, world = run_simulation(params, seed, log_events=True, return_world=True)
            if record.censored:
                continue
            implied = log_implied_losses(world.events, record.t_fd, params)
            assert record.losses == pytest.approx(implied, abs=1e-9)
            checked += 1
            if checked >= 5:
                break
        assert checked >= 3, "calibration drift: too few cascades in the scan"

    def test_volume_from_log_matches_engine_snapshot(self):
        params = active_params()
        params = SimParams(**{**params.__dict__, "max_timesteps": 120})
        for seed in range(30):
            record, world = run_simulation(params, seed, log_events=True, return_world=True)
            if record.volume is None:
                continue
            from_log = transaction_volume(world.events, 100, params.tau)
            assert record.volume == pytest.approx(from_log, abs=1e-9)
            return
        pytest.skip("no run reached the reference timestep")
