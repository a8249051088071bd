"""Timestep engine: random sequential pair updates, the interbank liquidity
market under three counterparty-ordering policies, and default cascades.

One timestep processes every bank-firm pair once, in a fresh random order.
Per pair: maturing repayments, deposit interest, the firm's loan request,
household redistribution, loan funding and payout, investment transfers, and
default checks. A bank default triggers a same-step cascade with zero
recovery on interbank loans, after which the run stops.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import metrics
from .centrality import debtrank_all, katz_scores, normalize_debtrank
from .params import MODES, RANK_METRICS, SimParams
from .world import (
    FirmLoan,
    IbLoan,
    WorldState,
    check_conservation,
    equity_vector,
    init_world,
    liability_matrix,
)

VOLUME_REF_TIME = 100  # reference timestep for the IB volume and risk-profile snapshot


@dataclass(frozen=True)
class ModePolicy:
    """How a borrower orders potential lenders.

    normal: fresh random order per funding round. transparent: ascending
    risk score, scores computed once at the start of each timestep. fast:
    ascending risk score, scores recomputed after every IB transaction.
    The rank metric is ignored in normal mode.
    """

    mode: str = "normal"
    rank_metric: str = "debtrank"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rank_metric not in RANK_METRICS:
            raise ValueError(
                f"rank_metric must be one of {RANK_METRICS}, got {self.rank_metric!r}"
            )

    @property
    def label(self) -> str:
        return self.mode if self.rank_metric == "debtrank" else f"{self.mode}-katz"

    @staticmethod
    def parse(label: str) -> "ModePolicy":
        if label.endswith("-katz"):
            return ModePolicy(label[: -len("-katz")], "katz")
        return ModePolicy(label, "debtrank")


@dataclass
class CascadeReport:
    """Outcome of one same-timestep default cascade."""

    trigger_bank: int
    defaulted_banks: list[int]
    t0: int
    capital_before: np.ndarray
    capital_after: np.ndarray


def _refresh_scores(world: WorldState, policy: ModePolicy) -> None:
    """Recompute risk scores and tie-break keys from the current snapshot."""
    L = liability_matrix(world)
    capital = equity_vector(world)
    defaulted = np.array([b.defaulted for b in world.banks])
    if policy.rank_metric == "debtrank":
        scores = debtrank_all(L, capital, psi=1.0, defaulted=defaulted)
    else:
        if defaulted.any():
            L = L.copy()
            L[defaulted, :] = 0.0
            L[:, defaulted] = 0.0
        scores = katz_scores(L)
    world.step_scores = scores
    world.step_tie = world.rng_market.permutation(world.params.n_banks)
    world.scores_dirty = False


def _risk_sorted(world: WorldState, candidates: list[int]) -> list[int]:
    scores, tie = world.step_scores, world.step_tie
    return sorted(candidates, key=lambda j: (scores[j], tie[j]))


def order_counterparties(
    world: WorldState, i: int, policy: ModePolicy, step_seed: int | None = None
) -> list[int]:
    """Non-defaulted neighbors of bank i, in the order they will be asked."""
    if world.banks[i].defaulted:
        raise ValueError(f"bank {i} has defaulted and cannot borrow")
    candidates = [int(j) for j in world.relation.neighbors(i) if not world.banks[j].defaulted]
    if policy.mode == "normal":
        if step_seed is None:
            step_seed = int(world.rng_market.integers(2**63))
        order = np.array(candidates, dtype=int)
        np.random.default_rng(step_seed).shuffle(order)
        return order.tolist()
    if world.step_scores is None or (policy.mode == "fast" and world.scores_dirty):
        _refresh_scores(world, policy)
    return _risk_sorted(world, candidates)


def _book_ib_loan(world: WorldState, lender: int, borrower: int, amount: float) -> None:
    loan = IbLoan(lender=lender, borrower=borrower, principal=amount, t_issued=world.t)
    world.banks[lender].cash -= amount
    world.banks[borrower].cash += amount
    world.banks[lender].ib_assets.append(loan)
    world.banks[borrower].ib_liabilities.append(loan)
    world.scores_dirty = True
    if not world.ib_issued_by_step:
        world.ib_issued_by_step.append(0.0)
    world.ib_issued_by_step[-1] += amount
    world.log("ib_loan", lender, borrower, amount)


def ib_funding_round(world: WorldState, i: int, amount: float, policy: ModePolicy) -> float:
    """Walk the ordered lender list until `amount` is raised or it is exhausted.

    Each lender provides min(its cash, remaining need). Partial shortfall is
    a modeled outcome, not an error; whatever was raised stays on the books.
    """
    if amount <= 0:
        raise ValueError(f"funding amount must be positive, got {amount}")
    bank = world.banks[i]
    target = bank.cash + amount
    ordered = order_counterparties(world, i, policy)
    world.log("ib_round", i, -1, amount)
    raised = 0.0
    pos = 0
    while bank.cash < target and pos < len(ordered):
        j = ordered[pos]
        pos += 1
        remaining = target - bank.cash
        world.log("ib_ask", i, j, remaining)
        give = min(world.banks[j].cash, remaining)
        if give > 0:
            _book_ib_loan(world, j, i, give)
            raised += give
            if policy.mode == "fast" and bank.cash < target and pos < len(ordered):
                _refresh_scores(world, policy)
                ordered = ordered[:pos] + _risk_sorted(world, ordered[pos:])
    return raised


def _remove_ib_loans(world: WorldState, borrower: int, loans: list[IbLoan]) -> None:
    ids = {id(l) for l in loans}
    bank = world.banks[borrower]
    bank.ib_liabilities = [l for l in bank.ib_liabilities if id(l) not in ids]
    for loan in loans:
        lender = world.banks[loan.lender]
        lender.ib_assets = [a for a in lender.ib_assets if a is not loan]


def _bank_repay_due(world: WorldState, b: int, policy: ModePolicy) -> CascadeReport | None:
    """Repay IB loans issued tau steps ago, borrowing for the shortfall if needed."""
    p = world.params
    bank = world.banks[b]
    due_loans = [l for l in bank.ib_liabilities if l.t_issued == world.t - p.tau]
    if not due_loans:
        return None
    amounts = [l.principal * (1.0 + p.r_ib) for l in due_loans]
    due = sum(amounts)
    if bank.cash < due:
        ib_funding_round(world, b, due - bank.cash, policy)
    if bank.cash < due:
        return resolve_defaults(world, b)
    bank.cash -= due
    left = due
    for k, (loan, amt) in enumerate(zip(due_loans, amounts)):
        pay = amt if k < len(due_loans) - 1 else left
        left -= pay
        world.banks[loan.lender].cash += pay
        world.log("ib_repay", b, loan.lender, pay)
    _remove_ib_loans(world, b, due_loans)
    world.scores_dirty = True
    return None


def _default_firm(world: WorldState, f: int) -> CascadeReport | None:
    """Liquidate a firm: the bank seizes cash and deposits, writes off the rest."""
    firm = world.firms[f]
    b = firm.main_bank
    bank = world.banks[b]
    outstanding = sum(l.principal for l in firm.bank_loans)
    estate = firm.cash + firm.deposits_at_bank
    world.log("firm_default", f, b, outstanding)
    world.log("firm_estate", f, b, estate)
    bank.cash += firm.cash
    firm.cash = 0.0
    bank.firm_deposits -= firm.deposits_at_bank
    firm.deposits_at_bank = 0.0
    ids = {id(l) for l in firm.bank_loans}
    bank.firm_loans = [l for l in bank.firm_loans if id(l) not in ids]
    firm.bank_loans.clear()
    firm.defaulted = True
    world.firm_defaulted_mask[f] = True
    if not bank.defaulted and bank.equity() < 0:
        return resolve_defaults(world, b)
    return None


def _firm_repay_due(world: WorldState, f: int) -> CascadeReport | None:
    """Firm repays loans issued tau steps ago from cash, then deposits."""
    p = world.params
    firm = world.firms[f]
    due_loans = [l for l in firm.bank_loans if l.t_issued == world.t - p.tau]
    if not due_loans:
        return None
    due = sum(l.principal for l in due_loans) * (1.0 + p.r_floan)
    if firm.cash + firm.deposits_at_bank < due:
        return _default_firm(world, f)
    bank = world.banks[firm.main_bank]
    pay_cash = min(max(firm.cash, 0.0), due)
    firm.cash -= pay_cash
    bank.cash += pay_cash
    rest = due - pay_cash
    if rest > 0:
        firm.deposits_at_bank -= rest
        bank.firm_deposits -= rest
    ids = {id(l) for l in due_loans}
    firm.bank_loans = [l for l in firm.bank_loans if id(l) not in ids]
    bank.firm_loans = [l for l in bank.firm_loans if id(l) not in ids]
    world.log("firm_repay", f, firm.main_bank, due)
    return None


def _credit_deposit_interest(world: WorldState, b: int) -> None:
    """Deposit interest is credited to the accounts; no cash moves. Profits
    above the bank's starting capital are paid out to the household in cash."""
    p = world.params
    bank = world.banks[b]
    if bank.household_deposits > 0 and p.r_h > 0:
        gain = bank.household_deposits * p.r_h
        bank.household_deposits += gain
        world.household.deposits[b] += gain
        world.log("interest_h", b, -1, gain)
    if p.r_fdeposit > 0:
        for f in world.firms_of_bank[b]:
            firm = world.firms[f]
            if firm.defaulted or firm.deposits_at_bank <= 0:
                continue
            gain = firm.deposits_at_bank * p.r_fdeposit
            firm.deposits_at_bank += gain
            bank.firm_deposits += gain
            world.log("interest_f", b, f, gain)
    if p.dividend_rate > 0:
        excess = bank.equity() - p.initial_bank_cash
        dividend = min(p.dividend_rate * excess, bank.cash)
        if dividend > 0:
            bank.cash -= dividend
            world.household.cash += dividend
            world.log("dividend", b, -1, dividend)


def _household_redistribute(
    world: WorldState,
    dep_bank: int,
    src_bank: int,
    eps_row: np.ndarray,
    policy: ModePolicy,
) -> None:
    """Random re-allocation of household funds: move the account held at one
    bank to another, save a slice of the cash buffer there, and spend the
    rest across firms with noisy return weights.

    Account moves are the banking system's liquidity churn; a bank whose
    deposits walk away covers its next obligations on the IB market.
    """
    p = world.params
    hh = world.household
    bank = world.banks[dep_bank]
    # relocate half the account held at a random source bank to the target
    # bank; the source pays out in cash, borrowing on the IB market for a
    # shortfall. Half-moves mix balances without piling them up in one spot.
    if src_bank != dep_bank:
        source = world.banks[src_bank]
        claim = hh.deposits[src_bank]
        if claim > 0 and not source.defaulted:
            due = 0.5 * claim
            if source.cash < due:
                ib_funding_round(world, src_bank, due - source.cash, policy)
            moved = min(source.cash, due)
            if moved > 0:
                source.cash -= moved
                source.household_deposits -= moved
                hh.deposits[src_bank] -= moved
                bank.cash += moved
                bank.household_deposits += moved
                hh.deposits[dep_bank] += moved
                world.log("hh_move", src_bank, dep_bank, moved)
    # save a fraction of the cash buffer: top the target account up to the
    # customary level, keep the rest of the savings outside the banks
    if hh.cash > 0 and p.deposit_fraction > 0:
        savings = p.deposit_fraction * hh.cash
        ceiling = p.initial_household_cash / p.n_banks
        dep = min(savings, max(0.0, ceiling - hh.deposits[dep_bank]))
        if dep > 0:
            hh.cash -= dep
            bank.cash += dep
            bank.household_deposits += dep
            hh.deposits[dep_bank] += dep
            world.log("hh_deposit", -1, dep_bank, dep)
        hoarded = savings - dep
        if hoarded > 0:
            hh.cash -= hoarded
            hh.hoard += hoarded
            world.log("hh_hoard", -1, -1, hoarded)
    spend = hh.cash
    if spend <= 0:
        return
    if spend > 0:
        w = 1.0 + world.firm_mu + eps_row * (p.firm_return_sd * p.consumption_dispersion)
        np.maximum(w, 0.0, out=w)
        w[world.firm_defaulted_mask] = 0.0
        total_w = float(w.sum())
        if total_w <= 0:
            return  # nobody to sell goods; the household holds the cash
        hh.cash -= spend
        idx = np.flatnonzero(w)
        shares = spend * (w[idx] / total_w)
        left = spend
        firms = world.firms
        for k in range(len(idx) - 1):
            s = float(shares[k])
            firms[int(idx[k])].cash += s
            left -= s
        firms[int(idx[-1])].cash += left  # remainder keeps the books exact
        world.log("hh_spend", -1, -1, spend)


def _fund_firm_loan(world: WorldState, b: int, f: int, amount: float, policy: ModePolicy) -> float:
    """All-or-nothing payout: grant only if cash plus raised IB funds cover it."""
    bank = world.banks[b]
    if bank.cash < amount:
        ib_funding_round(world, b, amount - bank.cash, policy)
    if bank.cash < amount:
        return 0.0  # raised funds, if any, stay on the books as cash
    bank.cash -= amount
    firm = world.firms[f]
    firm.cash += amount
    loan = FirmLoan(firm=f, principal=amount, t_issued=world.t)
    firm.bank_loans.append(loan)
    bank.firm_loans.append(loan)
    world.log("firm_loan", b, f, amount)
    return amount


def request_firm_loan(
    world: WorldState, bank: int, firm: int, policy: ModePolicy, amount: float | None = None
) -> float:
    """Draw (or take) a request size, then attempt the all-or-nothing payout."""
    firm_state = world.firms[firm]
    if firm_state.main_bank != bank:
        raise ValueError(f"bank {bank} is not the main bank of firm {firm}")
    if firm_state.defaulted or world.banks[bank].defaulted:
        raise ValueError("defaulted agents do not transact")
    if amount is None:
        amount = float(world.rng_econ.uniform(0.0, world.params.loan_request_max))
    _ensure_step_slots(world)
    if amount <= 0:
        return 0.0
    world.requested_by_step[-1] += amount
    world.log("firm_request", firm, bank, amount)
    granted = _fund_firm_loan(world, bank, firm, amount, policy)
    world.granted_by_step[-1] += granted
    return granted


def firm_cash_target(params: SimParams) -> float:
    """Working capital a firm keeps on hand for its repayment pipeline:
    tau loans of the mean request size, plus interest."""
    return 0.5 * params.loan_request_max * params.tau * (1.0 + params.r_floan)


def _firm_invest_and_deposit(world: WorldState, f: int, granted: float) -> None:
    """Pass the invest fraction of a fresh loan to the household; bank any cash
    beyond the firm's working-capital target."""
    p = world.params
    firm = world.firms[f]
    if granted > 0 and p.invest_fraction > 0:
        transfer = p.invest_fraction * granted
        firm.cash -= transfer
        world.household.cash += transfer
        world.log("invest", f, -1, transfer)
    surplus = firm.cash - firm_cash_target(p)
    if surplus > 0:
        bank = world.banks[firm.main_bank]
        firm.cash -= surplus
        bank.cash += surplus
        bank.firm_deposits += surplus
        firm.deposits_at_bank += surplus
        world.log("firm_deposit", f, firm.main_bank, surplus)


def resolve_defaults(world: WorldState, initial: int) -> CascadeReport:
    """Breadth-first default cascade within the current timestep.

    Creditors of each defaulter write off the full exposure (no recovery);
    any creditor pushed below zero equity defaults too. The defaulter's own
    liability ledger stays frozen so the loss shows up in its equity.
    """
    banks = world.banks
    if world.step_start_equity is not None:
        capital_before = world.step_start_equity.copy()
    else:
        capital_before = equity_vector(world)
    t0 = world.t
    banks[initial].defaulted = True
    world.log("bank_default", initial, -1, banks[initial].equity())
    order: list[int] = []
    queue = deque([initial])
    while queue:
        d = queue.popleft()
        order.append(d)
        affected: set[int] = set()
        for loan in banks[d].ib_liabilities:
            cred = banks[loan.lender]
            n_before = len(cred.ib_assets)
            cred.ib_assets = [a for a in cred.ib_assets if a is not loan]
            if len(cred.ib_assets) != n_before:
                world.log("ib_writeoff", d, loan.lender, loan.principal)
                affected.add(loan.lender)
        for c in sorted(affected):
            if not banks[c].defaulted and banks[c].equity() < 0:
                banks[c].defaulted = True
                world.log("bank_default", c, -1, banks[c].equity())
                queue.append(c)
    world.scores_dirty = True
    return CascadeReport(
        trigger_bank=initial,
        defaulted_banks=order,
        t0=t0,
        capital_before=capital_before,
        capital_after=equity_vector(world),
    )


def _ensure_step_slots(world: WorldState) -> None:
    while len(world.requested_by_step) < world.t:
        world.requested_by_step.append(0.0)
        world.granted_by_step.append(0.0)
        world.ib_issued_by_step.append(0.0)


def _update_pair(
    world: WorldState,
    f: int,
    request_amt: float,
    dep_bank: int,
    src_bank: int,
    eps_row: np.ndarray,
    policy: ModePolicy,
) -> CascadeReport | None:
    firm = world.firms[f]
    b = firm.main_bank
    bank = world.banks[b]
    # (i) repayments of loans issued tau steps ago
    if not firm.defaulted:
        report = _firm_repay_due(world, f)
        if report is not None:
            return report
    report = _bank_repay_due(world, b, policy)
    if report is not None:
        return report
    # (ii) profits and losses realize through the consumption flow in (v)
    # (iii) deposit interest
    _credit_deposit_interest(world, b)
    # (iv) the firm announces its request
    req = None
    if not firm.defaulted and request_amt > 0:
        req = request_amt
        world.requested_by_step[-1] += req
        world.log("firm_request", f, b, req)
    # (v) household redistribution
    _household_redistribute(world, dep_bank, src_bank, eps_row, policy)
    # (vi) bank liquidity management and payout
    if req is not None:
        granted = _fund_firm_loan(world, b, f, req, policy)
        world.granted_by_step[-1] += granted
    else:
        granted = 0.0
    # (vii) salaries and investments, then bank the surplus
    if not firm.defaulted:
        _firm_invest_and_deposit(world, f, granted)
    # (viii) default checks
    if not firm.defaulted and firm.equity() < world.params.firm_default_threshold:
        report = _default_firm(world, f)
        if report is not None:
            return report
    if not bank.defaulted and bank.equity() < 0:
        return resolve_defaults(world, b)
    return None


def run_timestep(world: WorldState, policy: ModePolicy) -> CascadeReport | None:
    """One full timestep of random sequential pair updates.

    Returns a CascadeReport if a bank defaulted (the run is then over),
    otherwise advances time by one.
    """
    if world.first_report is not None:
        raise RuntimeError("a bank has already defaulted; this run is finished")
    p = world.params
    world.step_start_equity = equity_vector(world)
    _ensure_step_slots(world)
    # all economic draws for the step, in one deterministic block
    pair_order = world.rng_econ.permutation(p.n_firms)
    requests = world.rng_econ.uniform(0.0, p.loan_request_max, p.n_firms)
    dep_banks = world.rng_econ.integers(0, p.n_banks, p.n_firms)
    src_banks = world.rng_econ.integers(0, p.n_banks, p.n_firms)
    eps = world.rng_econ.standard_normal((p.n_firms, p.n_firms))
    if policy.mode == "transparent":
        _refresh_scores(world, policy)
    report = None
    for k in range(p.n_firms):
        report = _update_pair(
            world,
            int(pair_order[k]),
            float(requests[k]),
            int(dep_banks[k]),
            int(src_banks[k]),
            eps[k],
            policy,
        )
        if report is not None:
            break
    check_conservation(world)
    if report is None:
        world.t += 1
        return None
    world.first_report = report
    return report


def _snapshot_reference_metrics(world: WorldState) -> None:
    p = world.params
    issued = world.ib_issued_by_step
    volume = issued[VOLUME_REF_TIME - 1]
    if VOLUME_REF_TIME - p.tau >= 1:
        volume += issued[VOLUME_REF_TIME - 1 - p.tau]
    world.volume_at_ref = volume
    defaulted = np.array([b.defaulted for b in world.banks])
    scores = debtrank_all(liability_matrix(world), equity_vector(world), 1.0, defaulted)
    profile, _ = normalize_debtrank(scores)
    world.debtrank_profile = sorted(profile.tolist(), reverse=True)


def run_simulation(
    params: SimParams,
    seed: int,
    policy: ModePolicy | None = None,
    log_events: bool = False,
    return_world: bool = False,
):
    """Run to the first bank-default cascade or max_timesteps; collect the record."""
    params.validate()
    if policy is None:
        policy = ModePolicy(params.mode, params.rank_metric)
    world = init_world(params, seed, log_events=log_events)
    report = None
    while world.t <= params.max_timesteps:
        report = run_timestep(world, policy)
        if report is not None:
            break
        if world.t - 1 == VOLUME_REF_TIME:
            _snapshot_reference_metrics(world)
    eff = metrics.efficiency(world.requested_by_step, world.granted_by_step)
    record = metrics.RunRecord(
        seed=seed,
        mode=policy.label,
        network=params.network_kind.label(),
        t_fd=None if report is None else report.t0,
        censored=report is None,
        losses=None if report is None else metrics.losses(report),
        cascade_size=None if report is None else len(report.defaulted_banks),
        efficiency=None if np.isnan(eff) else float(eff),
        volume=world.volume_at_ref,
        debtrank_profile=world.debtrank_profile,
    )
    if return_world:
        return record, world
    return record
