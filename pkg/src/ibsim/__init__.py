"""ibsim: agent-based interbank market simulator with risk-transparent
counterparty selection and systemic-risk metrics."""

__version__ = "0.1.0"

from .centrality import (
    debtrank,
    debtrank_all,
    economic_value,
    impact_matrix,
    katz_scores,
    normalize_debtrank,
    rank_banks,
    recursive_impact,
)
from .engine import CascadeReport, ModePolicy, request_firm_loan, resolve_defaults
from .engine import ib_funding_round, order_counterparties, run_simulation, run_timestep
from .ensemble import EnsembleConfig, EnsembleResult, histogram, run_ensemble
from .metrics import RunRecord, cascade_size, efficiency, losses, summary_stats, transaction_volume
from .network import RelationNetwork, gen_ba, gen_complete, gen_er
from .params import ConfigError, NetworkSpec, SimParams, load_config, parse_config
from .world import (
    BankState,
    FirmState,
    HouseholdState,
    WorldState,
    bank_equity,
    firm_equity,
    init_world,
    liability_matrix,
    total_cash,
)

__all__ = [
    "BankState",
    "CascadeReport",
    "ConfigError",
    "EnsembleConfig",
    "EnsembleResult",
    "FirmState",
    "HouseholdState",
    "ModePolicy",
    "NetworkSpec",
    "RelationNetwork",
    "RunRecord",
    "SimParams",
    "WorldState",
    "bank_equity",
    "cascade_size",
    "debtrank",
    "debtrank_all",
    "economic_value",
    "efficiency",
    "firm_equity",
    "gen_ba",
    "gen_complete",
    "gen_er",
    "histogram",
    "ib_funding_round",
    "impact_matrix",
    "init_world",
    "katz_scores",
    "liability_matrix",
    "load_config",
    "losses",
    "normalize_debtrank",
    "order_counterparties",
    "parse_config",
    "rank_banks",
    "recursive_impact",
    "request_firm_loan",
    "resolve_defaults",
    "run_ensemble",
    "run_simulation",
    "run_timestep",
    "summary_stats",
    "total_cash",
    "transaction_volume",
]
