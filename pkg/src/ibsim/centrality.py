"""Systemic-risk scores over a liability snapshot: distress-propagation rank,
Katz centrality, and ordinal ranks.

Conventions: L[i, j] is the amount bank i owes bank j (gross, no netting).
Capital is current bank equity. A risk score is "impact of this bank's
default on everyone else"; higher means riskier.
"""

from __future__ import annotations

import numpy as np

# h/s propagation states
_U, _D, _I = 0, 1, 2

KATZ_BETA = 1.0
KATZ_ALPHA_SAFETY = 0.99
KATZ_ALPHA_FALLBACK = 0.1
_RESIDUAL_TOL = 1e-10
_MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


def impact_matrix(liabilities: np.ndarray, capital: np.ndarray) -> np.ndarray:
    """Fraction of lender capital wiped out if the borrower defaults.

    W[i, j] = min(1, L[i, j] / C[j]); a lender with nonpositive capital takes
    full impact from any exposure. W is zero wherever L is zero.
    """
    L = np.asarray(liabilities, dtype=float)
    C = np.asarray(capital, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"liability matrix must be square, got shape {L.shape}")
    if C.shape != (L.shape[0],):
        raise ValueError(f"capital vector length {C.shape} does not match matrix size {L.shape[0]}")
    W = np.zeros_like(L)
    pos = C > 0
    W[:, pos] = np.minimum(1.0, L[:, pos] / C[pos])
    W[:, ~pos] = (L[:, ~pos] > 0).astype(float)
    return W


def economic_value(liabilities: np.ndarray) -> tuple[np.ndarray, bool]:
    """Per-bank share of total outstanding lending.

    v[i] = (sum of what others owe bank i) / (total owed in the system).
    Returns (v, degenerate); with no outstanding loans v is uniform and the
    degenerate flag is set.
    """
    L = np.asarray(liabilities, dtype=float)
    lending = L.sum(axis=0)
    total = lending.sum()
    if total <= 0:
        n = L.shape[0]
        return np.full(n, 1.0 / n), True
    return lending / total, False


def propagate_distress(
    W: np.ndarray, distressed: list[int] | np.ndarray, psi: float = 1.0
) -> tuple[np.ndarray, int]:
    """Run the once-only distress propagation to quiescence.

    Nodes in `distressed` start with distress level psi. Each node spreads
    distress to its creditors exactly once (distressed -> inactive after one
    round), so the loop ends within B rounds. Returns (h, rounds).
    """
    n = W.shape[0]
    h = np.zeros(n)
    state = np.full(n, _U, dtype=np.int8)
    h[list(distressed)] = psi
    state[list(distressed)] = _D
    rounds = 0
    while (state == _D).any():
        active = state == _D
        # accumulate in ascending spreader order, one rounding per term,
        # so results match a literal per-node propagation bit for bit
        delta = np.zeros(n)
        for j in np.flatnonzero(active):
            delta += W[j] * h[j]
        h_new = np.minimum(1.0, h + delta)
        fresh = (h_new > 0) & (state == _U)
        state[active] = _I
        state[fresh] = _D
        h = h_new
        rounds += 1
    return h, rounds


def debtrank(
    W: np.ndarray, v: np.ndarray, distressed: list[int] | np.ndarray, psi: float = 1.0
) -> float:
    """Total induced distress, value-weighted, excluding the seed's own distress."""
    if not 0.0 <= psi <= 1.0:
        raise ValueError(f"initial distress must be in [0, 1], got {psi}")
    seeds = list(distressed)
    if not seeds:
        raise ValueError("seed set must be nonempty")
    h, _ = propagate_distress(W, seeds, psi)
    score = 0.0
    for j in range(len(v)):  # fixed reduction order, see propagate_distress
        score += float(h[j]) * float(v[j])
    for i in seeds:
        score -= psi * float(v[i])
    # the score is a fraction of total economic value; clamp off float dust
    return min(1.0, max(0.0, score))


def debtrank_all(
    liabilities: np.ndarray,
    capital: np.ndarray,
    psi: float = 1.0,
    defaulted: np.ndarray | None = None,
) -> np.ndarray:
    """Single-seed distress-propagation score for every bank at once.

    All B propagations run in parallel as rows of a matrix. Defaulted banks
    are stripped from the snapshot first and score 0.
    """
    L = np.asarray(liabilities, dtype=float)
    n = L.shape[0]
    if defaulted is not None and defaulted.any():
        L = L.copy()
        L[defaulted, :] = 0.0
        L[:, defaulted] = 0.0
    W = impact_matrix(L, capital)
    v, _ = economic_value(L)
    H = np.eye(n) * psi
    state = np.full((n, n), _U, dtype=np.int8)
    np.fill_diagonal(state, _D)
    if defaulted is not None:
        H[defaulted, :] = 0.0
        state[defaulted, :] = _I
    while True:
        active = state == _D
        if not active.any():
            break
        H_new = np.minimum(1.0, H + (H * active) @ W)
        fresh = (H_new > 0) & (state == _U)
        state[active] = _I
        state[fresh] = _D
        H = H_new
    # per the rank definition the seed's own initial distress is excluded
    scores = np.clip(H @ v - psi * v, 0.0, 1.0)
    if defaulted is not None:
        scores[defaulted] = 0.0
    return scores


def normalize_debtrank(scores: np.ndarray) -> tuple[np.ndarray, bool]:
    """Scale scores to sum to one; uniform with a degenerate flag if all zero."""
    R = np.asarray(scores, dtype=float)
    if (R < 0).any():
        raise ValueError("scores must be nonnegative")
    total = R.sum()
    if total <= 0:
        n = len(R)
        return np.full(n, 1.0 / n), True
    return R / total, False


def recursive_impact(W: np.ndarray, v: np.ndarray, beta: float) -> np.ndarray:
    """Damped recursive impact I = Wv + beta*W*I, solved by fixed-point iteration.

    Diverges (and raises) when beta times the spectral radius of W reaches 1;
    kept for comparison against the propagation form, which caps distress at 1.
    """
    if beta < 0:
        raise ValueError(f"damping factor must be nonnegative, got {beta}")
    base = W @ v
    impact = np.zeros_like(base)
    for _ in range(_MAX_ITER):
        new = base + beta * (W @ impact)
        if not np.isfinite(new).all():
            break
        if np.abs(new - impact).max() <= _RESIDUAL_TOL:
            return new
        impact = new
    raise ConvergenceError(
        f"recursive impact did not converge (beta={beta}); "
        "beta * spectral_radius(W) must stay below 1"
    )


def _has_cycle(adjacency: np.ndarray) -> bool:
    """True when the directed graph has any cycle (checked via reachability)."""
    n = adjacency.shape[0]
    reach = adjacency.astype(np.int64)
    steps = max(1, int(np.ceil(np.log2(n))) + 1)
    for _ in range(steps):
        if reach.diagonal().any():
            return True
        reach = ((reach @ reach + reach) > 0).astype(np.int64)
    return bool(reach.diagonal().any())


def spectral_radius(matrix: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a nonnegative matrix, by power iteration.

    An acyclic matrix is nilpotent with radius exactly 0 (detected
    structurally, where power iteration is hopeless). Otherwise iterate on
    M + I, which shifts the dominant eigenvalue by exactly +1 and removes
    oscillation on periodic structures.
    """
    M = np.asarray(matrix, dtype=float)
    if not _has_cycle(M > 0):
        return 0.0
    n = M.shape[0]
    x = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(_MAX_ITER):
        y = M @ x + x
        norm = float(np.linalg.norm(y))
        x_new = y / norm
        lam_new = float(x_new @ (M @ x_new + x_new))
        if abs(lam_new - lam) <= _RESIDUAL_TOL * max(1.0, abs(lam_new)):
            return max(lam_new - 1.0, 0.0)
        x, lam = x_new, lam_new
    raise ConvergenceError("power iteration for the spectral radius did not converge")


def katz_scores(liabilities: np.ndarray, beta: float = KATZ_BETA) -> np.ndarray:
    """Katz centrality K = alpha*L*K + beta*1 over the liability matrix.

    alpha is set just inside the convergence boundary (0.99 / spectral
    radius); an acyclic or empty L gets a fixed fallback attenuation, under
    which the defining series is a finite sum. Every score is at least beta:
    pure lenders sit exactly at the offset, borrowers strictly above it.
    """
    L = np.asarray(liabilities, dtype=float)
    if (L < 0).any():
        raise ValueError("liability matrix must be nonnegative")
    n = L.shape[0]
    kappa = spectral_radius(L)
    alpha = KATZ_ALPHA_SAFETY / kappa if kappa >= 1e-12 else KATZ_ALPHA_FALLBACK
    ones = np.full(n, beta)
    eye = np.eye(n)
    # a power-iteration underestimate of the radius can put alpha over the
    # convergence boundary; shrink until the fixpoint verifies
    for _ in range(60):
        try:
            K = np.linalg.solve(eye - alpha * L, ones)
        except np.linalg.LinAlgError:
            alpha *= 0.9
            continue
        K = alpha * (L @ K) + ones  # refinement pass; also pins K >= beta exactly
        residual = float(np.abs(K - (alpha * (L @ K) + ones)).max())
        if np.isfinite(residual) and residual > _RESIDUAL_TOL:
            for _ in range(_MAX_ITER):
                K_new = alpha * (L @ K) + ones
                if not np.isfinite(K_new).all():
                    residual = float("inf")
                    break
                residual = float(np.abs(K_new - K).max())
                K = K_new
                if residual <= _RESIDUAL_TOL:
                    break
        if np.isfinite(residual) and residual <= _RESIDUAL_TOL and (K >= beta).all():
            return K
        alpha *= 0.9
    raise ConvergenceError("Katz fixpoint iteration did not converge")


def rank_banks(scores: np.ndarray, tie_seed: int) -> np.ndarray:
    """Ordinal risk ranks, 1 = highest score; ties broken by a seeded shuffle."""
    s = np.asarray(scores, dtype=float)
    n = len(s)
    perm = np.random.default_rng(tie_seed).permutation(n)
    order = np.lexsort((perm, -s))
    ranks = np.empty(n, dtype=int)
    ranks[order] = np.arange(1, n + 1)
    return ranks
