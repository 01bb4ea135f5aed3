"""Reference MMV solvers used for comparison against the covariance detector.

Three classical row-sparse recovery algorithms operating directly on the
``L x M`` multiple-measurement observation:

* ``msbl``    - multiple-measurement sparse Bayesian learning with EM
                hyperparameter updates (Wipf & Rao style), noise variance
                frozen at its true value.
* ``bomp``    - block orthogonal matching pursuit on the Kronecker-lifted
                single-vector model, evaluated in its mathematically
                equivalent unlifted form (simultaneous OMP).
* ``mfocuss`` - regularized M-FOCUSS (Cotter et al. style): iteratively
                reweighted least squares with row-norm weights.

All three are deterministic given their inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .model import Support
from .pilots import PilotDictionary

__all__ = ["MmvProblem", "msbl", "bomp", "mfocuss"]

# hyperparameters this far below the typical signal scale are treated as
# exactly zero (unit-power channels, unit-energy symbols)
_GAMMA_FLOOR = 1e-8


@dataclass(frozen=True)
class MmvProblem:
    """Row-sparse recovery instance: ``Y = S X + W`` with ``Y`` of size ``L x M``."""

    Y: np.ndarray
    pilots: PilotDictionary
    sigma_w2: float

    def __post_init__(self) -> None:
        Y = np.asarray(self.Y, dtype=complex)
        if Y.ndim != 2 or Y.shape[0] != self.pilots.L:
            raise InvalidParameterError(
                f"observation rows ({Y.shape}) must match pilot length {self.pilots.L}"
            )
        if self.sigma_w2 < 0:
            raise InvalidParameterError(f"sigma_w2 must be >= 0, got {self.sigma_w2}")
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_received_pilot(cls, Y_p: np.ndarray, pilots: PilotDictionary, sigma_w2: float) -> "MmvProblem":
        """Transpose the ``M x L`` antenna-domain observation into MMV form."""
        return cls(np.asarray(Y_p).conj().T, pilots, sigma_w2)

    @property
    def num_snapshots(self) -> int:
        return self.Y.shape[1]


def _support_from_scores(scores: np.ndarray, K: int, D_known, prune_tolerance: float) -> Support:
    scores = np.asarray(scores, dtype=float)
    if D_known is not None:
        order = np.argsort(-scores, kind="stable")[: int(D_known)]
        idx = sorted(int(i) for i in order if scores[i] > 0)
    else:
        peak = float(scores.max()) if scores.size else 0.0
        idx = [] if peak <= 0 else [int(i) for i in np.flatnonzero(scores > prune_tolerance * peak)]
    return Support(tuple(idx), K)


def msbl(
    problem: MmvProblem,
    max_iters: int = 500,
    prune_tolerance: float = 0.4,
    D_known: int | None = None,
    gamma_tol: float = 1e-6,
) -> Support:
    """Row-sparse support recovery via sparse Bayesian learning (EM updates).

    Each row of the unknown gets a Gaussian prior with its own variance
    hyperparameter; EM alternates the posterior moments with the variance
    update ``gamma_k = mean_m |mu_km|^2 + Sigma_kk``. The noise variance is
    held fixed at the problem's true value. Iteration stops when the
    relative hyperparameter change falls below ``gamma_tol``. The support is
    the ``D_known`` largest hyperparameters, or all above
    ``prune_tolerance * max(gamma)``.
    """
    S = problem.pilots.entries
    Y = problem.Y
    L, K = S.shape
    M = problem.num_snapshots
    sigma2 = max(problem.sigma_w2, 1e-12)

    gamma = np.ones(K)
    eye = np.eye(L)
    for _ in range(max_iters):
        SG = S * gamma[None, :]
        sigma_y = sigma2 * eye + SG @ S.conj().T
        solved = np.linalg.solve(sigma_y, np.concatenate([S, Y], axis=1))
        SiS = solved[:, :K]
        SiY = solved[:, K:]
        quad = np.einsum("lk,lk->k", S.conj(), SiS).real
        mu = gamma[:, None] * (S.conj().T @ SiY)
        mean_power = np.mean(np.abs(mu) ** 2, axis=1) if M else np.zeros(K)
        gamma_new = mean_power + np.maximum(gamma - gamma * gamma * quad, 0.0)
        gamma_new[gamma_new < _GAMMA_FLOOR] = 0.0
        peak = gamma_new.max()
        change = np.max(np.abs(gamma_new - gamma))
        gamma = gamma_new
        if peak == 0.0 or change <= gamma_tol * max(peak, 1e-30):
            break
    return _support_from_scores(gamma, K, D_known, prune_tolerance)


def bomp(problem: MmvProblem, D: int) -> Support:
    """Block-greedy pursuit; the activity level ``D`` is a required prior.

    Works on the unlifted ``L x M`` observation: the lifted model's block
    correlations factor into per-node residual correlations ``||s_k^H R||``,
    so no ``LM x KM`` matrix is ever materialized. Each round selects the
    highest-scoring node and refits all selected channels by least squares.
    """
    S = problem.pilots.entries
    Y = problem.Y
    L, K = S.shape
    if not 1 <= D <= K:
        raise InvalidParameterError(f"D must be in [1, {K}], got {D}")

    residual = Y
    selected: list[int] = []
    for _ in range(D):
        scores = np.linalg.norm(S.conj().T @ residual, axis=1)
        if selected:
            scores[selected] = -1.0
        k = int(np.argmax(scores))
        selected.append(k)
        S_sel = S[:, selected]
        coeff, *_ = np.linalg.lstsq(S_sel, Y, rcond=None)
        residual = Y - S_sel @ coeff
    return Support(tuple(sorted(selected)), K)


def mfocuss(
    problem: MmvProblem,
    p: float = 0.8,
    lam: float | None = None,
    max_iters: int = 200,
    prune_tolerance: float = 0.5,
    D_known: int | None = None,
    tol: float = 1e-6,
) -> Support:
    """Regularized M-FOCUSS: reweighted least squares toward row sparsity.

    Row weights are the current row norms raised to ``1 - p/2`` and the
    inner system is Tikhonov-regularized by ``lam``. The default ``lam``
    scales the noise variance by the square root of the snapshot count,
    matching how the row energies grow with snapshots. A singular inner
    system triggers an internal regularization bump with a warning. The
    support comes from the final row norms.
    """
    if not 0.0 < p <= 1.0:
        raise InvalidParameterError(f"p must lie in (0, 1], got {p}")
    S = problem.pilots.entries
    Y = problem.Y
    L, K = S.shape
    if lam is None:
        lam = problem.sigma_w2 * math.sqrt(max(problem.num_snapshots, 1))
    if lam < 0:
        raise InvalidParameterError(f"lam must be >= 0, got {lam}")

    eye = np.eye(L)
    # min-norm least squares start
    X = S.conj().T @ _solve_regularized(S @ S.conj().T, lam, Y, eye)
    for _ in range(max_iters):
        row_norms = np.linalg.norm(X, axis=1)
        peak = row_norms.max()
        if peak == 0.0:
            break
        weights = row_norms ** (1.0 - p / 2.0)
        B = S * weights[None, :]
        Z = _solve_regularized(B @ B.conj().T, lam, Y, eye)
        X_new = weights[:, None] * (B.conj().T @ Z)
        change = np.linalg.norm(X_new - X)
        X = X_new
        if change <= tol * max(np.linalg.norm(X), 1e-30):
            break
    final_norms = np.linalg.norm(X, axis=1)
    return _support_from_scores(final_norms, K, D_known, prune_tolerance)


def _solve_regularized(G: np.ndarray, lam: float, Y: np.ndarray, eye: np.ndarray) -> np.ndarray:
    """Solve ``(G + lam I) Z = Y`` robustly, bumping ``lam`` if singular."""
    if lam <= 0:
        # unregularized: minimum-norm solve tolerates the rank collapse that
        # reweighting produces on noiseless data
        return np.linalg.lstsq(G, Y, rcond=None)[0]
    lam_eff = lam
    for _ in range(6):
        try:
            Z = np.linalg.solve(G + lam_eff * eye, Y)
        except np.linalg.LinAlgError:
            Z = None
        if Z is not None and np.all(np.isfinite(Z)):
            return Z
        scale = max(float(np.trace(G).real) / G.shape[0], 1.0)
        lam_eff = max(lam_eff * 10.0, 1e-12 * scale)
        warnings.warn(
            f"singular inner system; regularization raised to {lam_eff:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return np.linalg.lstsq(G + lam_eff * eye, Y, rcond=None)[0]
