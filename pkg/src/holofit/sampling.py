"""Affine-invariant ensemble MCMC with the stretch move.

An ensemble of K walkers explores the target density; each walker is
updated by stretching along the line to a companion walker picked from
the complementary half of the ensemble (walkers are updated in two
half-ensemble sweeps so each proposal uses only already-valid states).
The stretch factor is drawn from g(z) proportional to 1/sqrt(z) on
[1/a, a], and a proposal y = x_j + z (x_k - x_j) is accepted with
probability min(1, z^(d-1) exp(logP(y) - logP(x_k))).

The move is invariant under affine reparameterizations of the target, so
it needs no tuning to sample the strongly correlated posteriors typical
of hologram fits.

Reference: Goodman, J. and Weare, J., Comm. App. Math. Comp. Sci. 5, 65
(2010).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EnsembleCollapseError", "stretch_move", "run_ensemble", "EnsembleRun"]


class EnsembleCollapseError(RuntimeError):
    """All walkers coincide; stretch proposals can no longer move."""


def draw_stretch(rng: np.random.Generator, a: float, size) -> np.ndarray:
    """Draw z with density proportional to 1/sqrt(z) on [1/a, a]."""
    u = rng.uniform(size=size)
    return ((a - 1.0) * u + 1.0) ** 2 / a


def stretch_move(
    state: np.ndarray,
    log_post,
    rng: np.random.Generator,
    a: float = 2.0,
    logp: np.ndarray | None = None,
):
    """One ensemble update; returns (state, logp, accepted) arrays.

    ``state`` is (K, d) with K >= 2 walkers; ``log_post`` maps a (B, d)
    batch to (B,) log posterior values; ``logp`` caches the current
    values (recomputed when omitted).  All current log posteriors must be
    finite.  The input arrays are not modified.
    """
    state = np.array(state, dtype=float)
    n_walkers, ndim = state.shape
    if n_walkers < 2:
        raise ValueError(f"need at least 2 walkers, got {n_walkers}")
    if np.all(state == state[0]):
        raise EnsembleCollapseError(
            "all walkers are identical; reinitialize with spread-out positions"
        )
    if logp is None:
        logp = np.asarray(log_post(state), dtype=float)
    else:
        logp = np.array(logp, dtype=float)
    if not np.all(np.isfinite(logp)):
        raise ValueError("all current walker log-posteriors must be finite")

    accepted = np.zeros(n_walkers, dtype=bool)
    half = n_walkers // 2
    groups = (np.arange(0, half), np.arange(half, n_walkers))
    for own, other in ((groups[0], groups[1]), (groups[1], groups[0])):
        nk = len(own)
        z = draw_stretch(rng, a, nk)
        comp = other[rng.integers(0, len(other), size=nk)]
        proposal = state[comp] + z[:, None] * (state[own] - state[comp])
        logp_new = np.asarray(log_post(proposal), dtype=float)
        with np.errstate(invalid="ignore"):
            log_ratio = (ndim - 1) * np.log(z) + logp_new - logp[own]
        accept = np.log(rng.uniform(size=nk)) < log_ratio
        accept &= np.isfinite(logp_new)
        state[own[accept]] = proposal[accept]
        logp[own[accept]] = logp_new[accept]
        accepted[own[accept]] = True
    return state, logp, accepted


@dataclass(frozen=True)
class EnsembleRun:
    """Chain output: positions (K, steps, d), log posteriors (K, steps),
    and per-walker acceptance fraction."""

    chain: np.ndarray
    log_post: np.ndarray
    acceptance: np.ndarray


def run_ensemble(
    log_post,
    start: np.ndarray,
    n_steps: int,
    rng: np.random.Generator,
    a: float = 2.0,
) -> EnsembleRun:
    """Run ``n_steps`` stretch-move updates from the (K, d) start ensemble."""
    state = np.array(start, dtype=float)
    n_walkers, ndim = state.shape
    logp = np.asarray(log_post(state), dtype=float)
    if not np.all(np.isfinite(logp)):
        bad = int(np.flatnonzero(~np.isfinite(logp))[0])
        raise ValueError(f"walker {bad} starts at non-finite log posterior")
    chain = np.empty((n_walkers, n_steps, ndim))
    chain_logp = np.empty((n_walkers, n_steps))
    n_accepted = np.zeros(n_walkers)
    for step in range(n_steps):
        state, logp, accepted = stretch_move(state, log_post, rng, a=a, logp=logp)
        chain[:, step, :] = state
        chain_logp[:, step] = logp
        n_accepted += accepted
    return EnsembleRun(
        chain=chain, log_post=chain_logp, acceptance=n_accepted / max(n_steps, 1)
    )
