"""Offline quantizer-selection optimization.

The selection problem decouples across stages: with the delay-indicator
matrix Phi and the offline coefficients beta_t^i, the adjusted price
c_t^i = lambda_i - beta_t^i is minimized independently at every t. A
brute-force enumerator over all M^T sequences (using the non-linearized
objective) is kept as an oracle, plus an LP-file export for audit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, InstanceTooLarge
from .innovation import InnovationStatistics, psi_factor
from .model import symmetrize
from .quantizer import CellMomentTable, QuantizerBank
from .synthesis import RiccatiSolution


def delay_matrix(T: int, delays) -> np.ndarray:
    """Binary (T, M) matrix with entry (t, j) = 1 iff t >= d_j."""
    delays = np.asarray(delays, dtype=int)
    rows = np.arange(T)[:, None]
    return (rows >= delays[None, :]).astype(int)


def arrival_indicator(theta, k: int, t: int, delays) -> int:
    """1 iff the message sent at k under selection theta has arrived by t."""
    if k > t:
        raise IndexOutOfRange(f"arrival_indicator requires k <= t, got k={k}, t={t}")
    return int(delays[theta[k]] <= t - k)


def n_tilde(stats: InnovationStatistics, riccati: RiccatiSolution, k: int, t: int):
    """The p x p PSD matrix Psi(t,k)' N_t Psi(t,k), k <= t <= T-1."""
    if not (0 <= k <= t < stats.T):
        raise IndexOutOfRange(f"n_tilde requires 0 <= k <= t <= T-1, got k={k}, t={t}")
    psi = psi_factor(stats, t, k)
    return symmetrize(psi.T @ riccati.N[t] @ psi)


def n_tilde_table(stats: InnovationStatistics, riccati: RiccatiSolution) -> np.ndarray:
    """All n_tilde(k, t) for k <= t, shape (T, T, p, p); zero for k > t.

    Built column-wise with the one-step propagation Psi(t+1,k) = A Psi(t,k)
    to avoid repeated matrix powers.
    """
    T, p = stats.T, stats.model.p
    A = stats.model.A
    out = np.zeros((T, T, p, p))
    for k in range(T):
        psi = stats.K[k]
        for t in range(k, T):
            out[k, t] = symmetrize(psi.T @ riccati.N[t] @ psi)
            psi = A @ psi
    return out


def beta_coefficients(
    stats: InnovationStatistics,
    riccati: RiccatiSolution,
    bank: QuantizerBank,
    moments: CellMomentTable,
    ntil: np.ndarray | None = None,
) -> np.ndarray:
    """Offline (T, M) array of beta_t^i = tr(G_t^i F_t^i).

    G_t^i is the suffix sum of n_tilde(t, l) over l >= t + d_i, i.e. the
    Phi-weighted accumulation; beta is zero in the tail t >= T - d_i.
    """
    T, M = stats.T, bank.M
    if ntil is None:
        ntil = n_tilde_table(stats, riccati)
    p = stats.model.p
    beta = np.zeros((T, M))
    for t in range(T):
        # suffix[j] = sum of n_tilde(t, l) for l >= t + j
        suffix = np.zeros((T - t + 1, p, p))
        for l in range(T - 1, t - 1, -1):
            suffix[l - t] = suffix[l - t + 1] + ntil[t, l]
        for i in range(M):
            d = int(bank.delays[i])
            g = suffix[min(d, T - t)]
            beta[t, i] = float(np.trace(g @ moments.F[t, i]))
    return beta


@dataclass(frozen=True, eq=False)
class SelectionSchedule:
    """Optimal offline schedule with its cost bookkeeping.

    beta, c: (T, M) arrays with c = prices - beta; theta_star: (T,) bank
    indices (lowest index on ties); C0: selection-dependent cost of the
    optimal schedule plus its theta-independent constant; J_star: total
    optimal cost tr(P0 (Sigma_x + mu0 mu0')) + r0 + C0.
    """

    beta: np.ndarray
    c: np.ndarray
    theta_star: np.ndarray
    C0: float
    J_star: float


def optimal_schedule(beta: np.ndarray, prices) -> tuple[np.ndarray, np.ndarray]:
    """Per-stage argmin of c_t^i = lambda_i - beta_t^i.

    Returns (theta_star, c). np.argmin's lowest-index tie-break gives the
    deterministic schedule.
    """
    c = np.asarray(prices, dtype=float)[None, :] - beta
    return np.argmin(c, axis=1), c


def c0_constant(stats: InnovationStatistics, riccati: RiccatiSolution,
                ntil: np.ndarray | None = None) -> float:
    """Theta-independent part of C0: sum_t tr(Sigma_t N_t) + sum_{k<=t} tr(ntil M_k)."""
    T = stats.T
    if ntil is None:
        ntil = n_tilde_table(stats, riccati)
    total = 0.0
    for t in range(T):
        total += float(np.trace(stats.Sigma_filt[t] @ riccati.N[t]))
        for k in range(t + 1):
            total += float(np.trace(ntil[k, t] @ stats.M[k]))
    return total


def evaluate_C0(
    theta,
    stats: InnovationStatistics,
    riccati: RiccatiSolution,
    moments: CellMomentTable,
    delays,
    prices,
    ntil: np.ndarray | None = None,
) -> float:
    """C0 for an arbitrary selection sequence, via the non-linearized form.

    C0(theta) = const + sum_t [ tr(Pi_t F_t^{theta_t}) + price_{theta_t} ]
    with Pi_t = -sum_{l>=t} 1_{d <= l-t} n_tilde(t, l). For one-hot
    selections this equals the linearized sum of adjusted prices plus the
    constant.
    """
    T = stats.T
    if ntil is None:
        ntil = n_tilde_table(stats, riccati)
    total = c0_constant(stats, riccati, ntil)
    for t in range(T):
        i = int(theta[t])
        d = int(delays[i])
        pi = np.zeros_like(ntil[t, t])
        for l in range(t + d, T):
            pi -= ntil[t, l]
        total += float(np.trace(pi @ moments.F[t, i])) + float(prices[i])
    return total


def error_second_moment(
    theta,
    stats: InnovationStatistics,
    moments: CellMomentTable,
    delays,
    t: int,
) -> np.ndarray:
    """E[e_t e_t'] for the controller-side estimation error at time t.

    Sigma_t plus, per origin k <= t, the full innovation covariance if the
    message has not arrived and the residual covariance after decoding if
    it has.
    """
    out = stats.Sigma_filt[t].copy()
    for k in range(t + 1):
        psi = psi_factor(stats, t, k)
        if arrival_indicator(theta, k, t, delays):
            out += psi @ moments.residual_covariance(k, int(theta[k])) @ psi.T
        else:
            out += psi @ moments.M_cov[k] @ psi.T
    return symmetrize(out)


def export_milp(c: np.ndarray) -> str:
    """LP-file text for min sum_t c_t' theta_t with one-hot stage constraints.

    Variables are named x_t_i with i 1-based; emitted for interoperability
    and audit only (the shipped solver path is the per-stage argmin).
    """
    T, M = c.shape
    lines = ["Minimize", " obj:"]
    terms = []
    for t in range(T):
        for i in range(M):
            coef = c[t, i]
            terms.append(f" {'+' if coef >= 0 else '-'} {abs(coef):.17g} x_{t}_{i + 1}")
    lines.append("   " + "".join(terms).lstrip())
    lines.append("Subject To")
    for t in range(T):
        lhs = " + ".join(f"x_{t}_{i + 1}" for i in range(M))
        lines.append(f" assign_{t}: {lhs} = 1")
    lines.append("Binary")
    for t in range(T):
        for i in range(M):
            lines.append(f" x_{t}_{i + 1}")
    lines.append("End")
    return "\n".join(lines) + "\n"


BRUTE_FORCE_CAP = 10**6


def brute_force_schedule(
    stats: InnovationStatistics,
    riccati: RiccatiSolution,
    moments: CellMomentTable,
    delays,
    prices,
) -> tuple[np.ndarray, float]:
    """Exhaustive optimum over all M^T selection sequences.

    Minimizes the non-linearized C0 (oracle for the per-stage argmin and
    the decoupling claim). Guarded by M**T <= 1e6.
    """
    T = stats.T
    M = len(delays)
    if M ** T > BRUTE_FORCE_CAP:
        raise InstanceTooLarge(f"M^T = {M}**{T} exceeds {BRUTE_FORCE_CAP}")
    ntil = n_tilde_table(stats, riccati)
    const = c0_constant(stats, riccati, ntil)

    # Per-(t, i) contribution: the objective is separable even in Pi-form,
    # but evaluate it per sequence as stated to stay an independent oracle.
    best_val = np.inf
    best_theta = None
    for theta in itertools.product(range(M), repeat=T):
        val = 0.0
        for t in range(T):
            i = theta[t]
            d = int(delays[i])
            acc = 0.0
            for l in range(t + d, T):
                acc -= float(np.trace(ntil[t, l] @ moments.F[t, i]))
            val += acc + float(prices[i])
        if val < best_val:
            best_val = val
            best_theta = theta
    return np.array(best_theta, dtype=int), const + best_val


def compute_schedule(
    model,
    riccati: RiccatiSolution,
    stats: InnovationStatistics,
    bank: QuantizerBank,
    moments: CellMomentTable,
) -> SelectionSchedule:
    """Assemble the optimal schedule and its theoretical cost components."""
    ntil = n_tilde_table(stats, riccati)
    beta = beta_coefficients(stats, riccati, bank, moments, ntil=ntil)
    theta_star, c = optimal_schedule(beta, bank.prices)
    C0 = evaluate_C0(theta_star, stats, riccati, moments, bank.delays,
                     bank.prices, ntil=ntil)
    J_star = float(
        np.trace(riccati.P[0] @ (model.Sigma_x + np.outer(model.mu0, model.mu0)))
        + riccati.r[0] + C0
    )
    return SelectionSchedule(beta=beta, c=c, theta_star=theta_star, C0=C0, J_star=J_star)


def beta_constant_delay(
    stats: InnovationStatistics,
    riccati: RiccatiSolution,
    moments: CellMomentTable,
    d: int,
) -> np.ndarray:
    """(T, M) beta via the constant-delay shortcut H(t,d) = sum_{l>=t+d} ntil(t,l)."""
    T = stats.T
    M = moments.n_quantizers
    ntil = n_tilde_table(stats, riccati)
    beta = np.zeros((T, M))
    for t in range(T):
        h = np.zeros_like(ntil[t, t])
        for l in range(t + d, T):
            h += ntil[t, l]
        for i in range(M):
            beta[t, i] = float(np.trace(h @ moments.F[t, i]))
    return beta


def beta_full_observation(
    stats: InnovationStatistics,
    riccati: RiccatiSolution,
    moments: CellMomentTable,
    delays,
) -> np.ndarray:
    """(T, M) beta via the full-observation fast path (C = I, V = 0).

    Uses the backward accumulation U_s = A'U_{s+1}A + N_s, for which
    sum_{l >= t+d} A^{l-t}' N_l A^{l-t} = A^d' U_{t+d} A^d, so
    beta_t^i = tr(U_{t+d_i} A^{d_i} F_t^i A^{d_i}').
    """
    from .synthesis import upsilon_recursion

    model = stats.model
    T = stats.T
    ups = upsilon_recursion(riccati.N, model.A)
    beta = np.zeros((T, len(delays)))
    for i, d in enumerate(np.asarray(delays, dtype=int)):
        Ad = np.linalg.matrix_power(model.A, int(d))
        for t in range(T):
            s = min(t + int(d), T)
            beta[t, i] = float(np.trace(ups[s] @ Ad @ moments.F[t, i] @ Ad.T))
    return beta
