"""Post-detection channel estimation, data decoding, and error metrics.

Once the active set is decided, the channel columns are estimated by least
squares against the detected pilot columns, the data block is decoded by the
left pseudo-inverse of the channel estimate, and symbols are sliced to the
nearest constellation point. Error accounting runs over the augmented
alphabet (constellation plus the zero symbol of inactive nodes), so missed
and false-alarm nodes show up as symbol errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SingularSystemError
from .model import Support

__all__ = [
    "ModulationScheme",
    "LinkResult",
    "qpsk",
    "draw_symbols",
    "ls_channel_estimate",
    "ls_data_decode",
    "demodulate",
    "spread_symbols",
    "despread_symbols",
    "channel_mse",
    "symbol_error_rate",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ModulationScheme:
    """Finite complex constellation with unit average symbol energy."""

    name: str
    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=complex).ravel()
        if points.size < 1:
            raise InvalidParameterError("alphabet must be nonempty")
        energy = float(np.mean(np.abs(points) ** 2))
        if not math.isclose(energy, 1.0, rel_tol=1e-9, abs_tol=1e-9):
            raise InvalidParameterError(f"mean symbol energy must be 1, got {energy}")
        object.__setattr__(self, "points", points)

    @property
    def order(self) -> int:
        return self.points.size


def qpsk() -> ModulationScheme:
    pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2)
    return ModulationScheme("qpsk", pts)


@dataclass(frozen=True)
class LinkResult:
    """Outcome of the estimation/decoding stage for one detected support."""

    H_hat: np.ndarray
    D_soft: np.ndarray
    symbol_indices: np.ndarray
    ser: float
    channel_mse: float


def draw_symbols(scheme: ModulationScheme, shape, rng: np.random.Generator):
    """Uniform random constellation symbols; returns (indices, values)."""
    idx = rng.integers(0, scheme.order, size=shape)
    return idx, scheme.points[idx]


def _check_gram(gram: np.ndarray, what: str) -> None:
    cond = float(np.linalg.cond(gram)) if gram.size else 1.0
    if not math.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularSystemError(
            f"{what} Gram matrix is numerically singular (condition number {cond:.3e})"
        )


def ls_channel_estimate(Y_p: np.ndarray, S_active: np.ndarray) -> np.ndarray:
    """Least-squares channel estimate against the detected pilot columns.

    ``Y_p`` is ``M x L``, ``S_active`` is ``L x K_a``; returns the ``M x K_a``
    estimate ``Y_p S (S^H S)^{-1}``. Requires ``K_a <= L`` with linearly
    independent columns.
    """
    Y = np.asarray(Y_p)
    S = np.asarray(S_active)
    if Y.ndim != 2 or S.ndim != 2 or Y.shape[1] != S.shape[0]:
        raise InvalidParameterError(
            f"pilot length mismatch between observation {Y.shape} and pilots {S.shape}"
        )
    K_a = S.shape[1]
    if K_a == 0:
        return np.zeros((Y.shape[0], 0), dtype=complex)
    if K_a > S.shape[0]:
        raise SingularSystemError(
            f"cannot estimate {K_a} channels from pilots of length {S.shape[0]}"
        )
    gram = S.conj().T @ S
    _check_gram(gram, "pilot")
    # H G = Y S  with Hermitian G  =>  H = solve(G, (Y S)^H)^H
    return np.linalg.solve(gram, (Y @ S).conj().T).conj().T


def ls_data_decode(Y_d: np.ndarray, H_hat: np.ndarray) -> np.ndarray:
    """Least-squares data decoding with a tall channel estimate.

    ``Y_d`` is ``M x N``, ``H_hat`` is ``M x K_a`` with ``M >= K_a``; returns
    the soft symbol block ``(H^H H)^{-1} H^H Y_d`` of shape ``K_a x N``.
    """
    Y = np.asarray(Y_d)
    H = np.asarray(H_hat)
    if Y.ndim != 2 or H.ndim != 2 or Y.shape[0] != H.shape[0]:
        raise InvalidParameterError(
            f"antenna count mismatch between data {Y.shape} and channel {H.shape}"
        )
    if H.shape[1] == 0:
        return np.zeros((0, Y.shape[1]), dtype=complex)
    if H.shape[0] < H.shape[1]:
        raise SingularSystemError(
            f"need at least as many antennas as streams, got {H.shape}"
        )
    gram = H.conj().T @ H
    _check_gram(gram, "channel")
    return np.linalg.solve(gram, H.conj().T @ Y)


def demodulate(D_soft: np.ndarray, scheme: ModulationScheme) -> np.ndarray:
    """Nearest-point decision per entry; ties go to the lowest alphabet index."""
    soft = np.asarray(D_soft, dtype=complex)
    dist = np.abs(soft[..., None] - scheme.points)
    return np.argmin(dist, axis=-1)


def spread_symbols(symbols: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Per-node random spreading: slot ``n`` of node ``k`` becomes ``d_kn * c_k``.

    ``codes`` is ``K_a x L_d`` with unit-norm rows; output is
    ``K_a x (N * L_d)`` with slot blocks laid out contiguously.
    """
    d = np.asarray(symbols)
    c = np.asarray(codes)
    if d.ndim != 2 or c.ndim != 2 or d.shape[0] != c.shape[0]:
        raise InvalidParameterError("one spreading code per node required")
    K_a, N = d.shape
    L_d = c.shape[1]
    return (d[:, :, None] * c[:, None, :]).reshape(K_a, N * L_d)


def despread_symbols(soft: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Matched-filter despreading, inverse of :func:`spread_symbols`."""
    s = np.asarray(soft)
    c = np.asarray(codes)
    if s.ndim != 2 or c.ndim != 2 or s.shape[0] != c.shape[0]:
        raise InvalidParameterError("one spreading code per node required")
    K_a = s.shape[0]
    L_d = c.shape[1]
    if s.shape[1] % L_d:
        raise InvalidParameterError("soft block length must be a multiple of the code length")
    N = s.shape[1] // L_d
    blocks = s.reshape(K_a, N, L_d)
    energy = np.sum(np.abs(c) ** 2, axis=1)
    return np.einsum("knl,kl->kn", blocks, c.conj()) / energy[:, None]


def channel_mse(H_true_active: np.ndarray, H_hat: np.ndarray) -> float:
    """Sum over active nodes of the normalized squared column error."""
    Ht = np.asarray(H_true_active)
    He = np.asarray(H_hat)
    if Ht.shape != He.shape:
        raise InvalidParameterError(f"shape mismatch: {Ht.shape} vs {He.shape}")
    true_power = np.sum(np.abs(Ht) ** 2, axis=0)
    if np.any(true_power == 0):
        raise InvalidParameterError("true channel columns must be nonzero")
    err_power = np.sum(np.abs(Ht - He) ** 2, axis=0)
    return float(np.sum(err_power / true_power))


def symbol_error_rate(
    true_symbols: np.ndarray,
    est_symbols: np.ndarray,
    support_true: Support,
    support_hat: Support,
) -> float:
    """Fraction of wrong augmented-alphabet decisions over the union of supports.

    Both symbol matrices are ``K x N`` with zero rows outside the respective
    supports. A missed node contributes a full row of errors, a false alarm
    contributes one error per nonzero decision, and the denominator is
    ``|union| * N``. An empty union yields 0.
    """
    T = np.asarray(true_symbols)
    E = np.asarray(est_symbols)
    if T.shape != E.shape or T.ndim != 2:
        raise InvalidParameterError(f"symbol blocks must share a K x N shape, got {T.shape} vs {E.shape}")
    union = sorted(set(support_true.indices) | set(support_hat.indices))
    if not union or T.shape[1] == 0:
        return 0.0
    diff = np.abs(T[union, :] - E[union, :]) > 1e-9
    return float(np.mean(diff))
