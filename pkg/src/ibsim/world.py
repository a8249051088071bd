"""Balance sheets for banks, firms and the aggregated household.

The monetary system is closed: cash only ever moves between agents, so the
total across all cash fields is invariant. Defaults destroy equity (claims),
never cash. Every loan lives as a single object referenced from both sides
of the contract, which keeps the two ledgers consistent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import SimParams

CONSERVATION_RTOL = 1e-9


@dataclass(slots=True)
class FirmLoan:
    """A bank's loan to a firm; held by both the firm and its bank."""

    firm: int
    principal: float
    t_issued: int


@dataclass(slots=True)
class IbLoan:
    """An interbank loan; held in the lender's assets and the borrower's liabilities."""

    lender: int
    borrower: int
    principal: float
    t_issued: int


@dataclass(slots=True)
class BankState:
    cash: float
    firm_loans: list[FirmLoan] = field(default_factory=list)
    ib_assets: list[IbLoan] = field(default_factory=list)
    ib_liabilities: list[IbLoan] = field(default_factory=list)
    household_deposits: float = 0.0
    firm_deposits: float = 0.0
    defaulted: bool = False

    def equity(self) -> float:
        return (
            self.cash
            + sum(l.principal for l in self.firm_loans)
            + sum(l.principal for l in self.ib_assets)
            - self.household_deposits
            - self.firm_deposits
            - sum(l.principal for l in self.ib_liabilities)
        )


@dataclass(slots=True)
class FirmState:
    cash: float
    main_bank: int
    bank_loans: list[FirmLoan] = field(default_factory=list)
    deposits_at_bank: float = 0.0
    return_mean: float = 0.0
    defaulted: bool = False

    def equity(self) -> float:
        return self.cash + self.deposits_at_bank - sum(l.principal for l in self.bank_loans)


@dataclass(slots=True)
class HouseholdState:
    cash: float
    deposits: np.ndarray  # per-bank claim, mirrors BankState.household_deposits
    hoard: float = 0.0  # savings kept outside the banking system


class ConservationError(RuntimeError):
    """Total cash drifted beyond tolerance; always an internal bug, never a model outcome."""


class WorldState:
    """Complete state of one simulation run; confined to a single thread."""

    def __init__(self, params: SimParams, seed: int, log_events: bool = False):
        params.validate()
        self.params = params
        self.seed = seed
        root = np.random.SeedSequence(seed)
        self.network_seed = int(root.generate_state(1, np.uint64)[0])
        econ_ss, market_ss = root.spawn(2)
        # econ stream: pair order, request sizes, household draws - identical
        # across modes for a given seed. market stream: counterparty shuffles
        # and tie-breaks, the only place modes diverge.
        self.rng_econ = np.random.default_rng(econ_ss)
        self.rng_market = np.random.default_rng(market_ss)
        self.relation = params.network_kind.build(params.n_banks, self.network_seed)
        self.banks = [BankState(cash=params.initial_bank_cash) for _ in range(params.n_banks)]
        self.firms = [
            FirmState(
                cash=params.initial_firm_cash,
                main_bank=i,  # F = B, one firm per bank
                return_mean=params.firm_return_mean,
            )
            for i in range(params.n_firms)
        ]
        # the household's endowment starts fully deposited, spread evenly;
        # the deposit backing sits in the banks' tills
        per_bank = params.initial_household_cash / params.n_banks
        self.household = HouseholdState(cash=0.0, deposits=np.full(params.n_banks, per_bank))
        for bank in self.banks:
            bank.cash += per_bank
            bank.household_deposits += per_bank
        self.firm_mu = np.array([f.return_mean for f in self.firms])
        self.firm_defaulted_mask = np.zeros(params.n_firms, dtype=bool)
        self.firms_of_bank: list[list[int]] = [[] for _ in range(params.n_banks)]
        for i, f in enumerate(self.firms):
            self.firms_of_bank[f.main_bank].append(i)
        self.t = 1
        self.events: list[tuple] | None = [] if log_events else None
        self.requested_by_step: list[float] = []
        self.granted_by_step: list[float] = []
        self.ib_issued_by_step: list[float] = []
        self.step_scores: np.ndarray | None = None
        self.step_tie: np.ndarray | None = None
        self.scores_dirty = True
        self.step_start_equity: np.ndarray | None = None
        self.first_report = None
        self.volume_at_ref: float | None = None
        self.debtrank_profile: list[float] | None = None
        self.baseline_cash = total_cash(self)

    def log(self, kind: str, a: int, b: int, amount: float) -> None:
        if self.events is not None:
            self.events.append((self.t, kind, a, b, amount))


def total_cash(world: WorldState) -> float:
    return (
        sum(b.cash for b in world.banks)
        + sum(f.cash for f in world.firms)
        + world.household.cash
        + world.household.hoard
    )


def check_conservation(world: WorldState) -> None:
    total = total_cash(world)
    base = world.baseline_cash
    if abs(total - base) > CONSERVATION_RTOL * max(base, 1.0):
        raise ConservationError(
            f"cash not conserved at t={world.t}: baseline={base!r}, current={total!r}, "
            f"banks={sum(b.cash for b in world.banks)!r}, "
            f"firms={sum(f.cash for f in world.firms)!r}, "
            f"household={world.household.cash!r}"
        )


def init_world(params: SimParams, seed: int, log_events: bool = False) -> WorldState:
    """Fresh world: endowments in place, ledgers empty, relation network built.

    The network generator consumes a sub-seed derived from the run seed
    (stored as `network_seed`), so the network can be reproduced standalone.
    """
    return WorldState(params, seed, log_events=log_events)


def bank_equity(world: WorldState, i: int) -> float:
    """Balance-sheet identity value for bank i; never mutates state."""
    return world.banks[i].equity()


def firm_equity(world: WorldState, i: int) -> float:
    return world.firms[i].equity()


def equity_vector(world: WorldState) -> np.ndarray:
    return np.array([b.equity() for b in world.banks])


def liability_matrix(world: WorldState) -> np.ndarray:
    """Gross interbank exposures: entry (i, j) is what bank i owes bank j.

    Read straight off the borrowers' ledgers; offsetting loans are not netted.
    """
    n = world.params.n_banks
    L = np.zeros((n, n))
    for i, bank in enumerate(world.banks):
        for loan in bank.ib_liabilities:
            L[i, loan.lender] += loan.principal
    return L
