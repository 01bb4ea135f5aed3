"""Non-orthogonal training dictionaries and their coherence statistics.

The detector operates on the column-wise Kronecker lift of the pilot
dictionary, whose coherence is the square of the base coherence; the helpers
here quantify how far a code family is from the Welch floor and how much
sparsity it can identify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "PilotDictionary",
    "gen_gaussian_dictionary",
    "mutual_coherence",
    "khatri_rao_dictionary",
    "khatri_rao_coherence",
    "welch_bound",
    "max_identifiable_support",
    "min_pilot_length",
    "save_csv",
    "load_csv",
]


def _normalize_columns(entries: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(entries, axis=0)
    if np.any(norms == 0):
        raise InvalidParameterError("pilot columns must be nonzero")
    return entries / norms


@dataclass(frozen=True)
class PilotDictionary:
    """``L x K`` training dictionary with unit-norm columns.

    The mutual coherence is computed once at construction and cached.
    """

    entries: np.ndarray
    coherence: float
    kind: str

    @property
    def L(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def from_matrix(cls, entries: np.ndarray, kind: str = "user-supplied") -> "PilotDictionary":
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
            raise InvalidParameterError(f"pilot matrix must be 2-D and nonempty, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise InvalidParameterError("pilot entries must be finite")
        normalized = _normalize_columns(entries)
        mu = mutual_coherence(normalized) if entries.shape[1] >= 2 else 0.0
        return cls(normalized, mu, kind)


def gen_gaussian_dictionary(L: int, K: int, rng: np.random.Generator) -> PilotDictionary:
    """Random Gaussian code: i.i.d. complex normal entries, columns normalized."""
    if L < 1 or K < 1:
        raise InvalidParameterError(f"L and K must be >= 1, got L={L}, K={K}")
    raw = rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
    return PilotDictionary.from_matrix(raw, kind="gaussian-random")


def mutual_coherence(pilots) -> float:
    """Largest absolute inner product between distinct normalized columns."""
    S = np.asarray(getattr(pilots, "entries", pilots), dtype=complex)
    if S.ndim != 2 or S.shape[1] < 2:
        raise InvalidParameterError("mutual coherence needs at least two columns")
    S = _normalize_columns(S)
    gram = np.abs(S.conj().T @ S)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def khatri_rao_dictionary(pilots) -> np.ndarray:
    """Column-wise Kronecker lift ``conj(S) (x) S`` of shape ``L^2 x K``.

    Column ``k`` is ``kron(conj(s_k), s_k)``, chosen so that
    ``vec(S diag(r) S^H) == lift @ r`` holds exactly for complex pilots
    (column-major vectorization).
    """
    S = np.asarray(getattr(pilots, "entries", pilots), dtype=complex)
    if S.ndim != 2:
        raise InvalidParameterError(f"pilot matrix must be 2-D, got {S.shape}")
    L = S.shape[0]
    return (S.conj()[:, None, :] * S[None, :, :]).reshape(L * L, S.shape[1])


def khatri_rao_coherence(mu: float) -> float:
    """Coherence of the Kronecker-lifted dictionary: the base coherence squared."""
    if not 0.0 <= mu <= 1.0:
        raise InvalidParameterError(f"coherence must lie in [0, 1], got {mu}")
    return mu * mu


def welch_bound(K: int, L: int) -> float:
    """Lower bound on the coherence of ``K`` unit-norm columns in ``L`` dims.

    Zero when ``K <= L`` (an orthonormal set exists).
    """
    if K < 2:
        raise InvalidParameterError(f"K must be >= 2, got {K}")
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    if K <= L:
        return 0.0
    return math.sqrt((K - L) / ((K - 1) * L))


def max_identifiable_support(mu: float) -> int:
    """Largest sparsity level the covariance-domain detector can guarantee.

    Uniqueness of the nonnegative sparse solution holds while the activity
    level is strictly below ``(1 + 1/mu^2) / 2``, ``mu`` being the coherence
    of the base dictionary (the lifted dictionary has coherence ``mu^2``).
    """
    if mu <= 0.0 or mu > 1.0:
        raise InvalidParameterError(f"coherence must lie in (0, 1], got {mu}")
    limit = 0.5 * (1.0 + 1.0 / (mu * mu))
    d = math.floor(limit)
    if d == limit:
        d -= 1
    return max(d, 0)


def min_pilot_length(K: int, D_max: int) -> int:
    """Shortest pilot length able to identify ``D_max`` active nodes.

    Combines the squared-coherence support condition with the Welch floor;
    the returned length strictly satisfies ``L > (2*K*D - K)/(K + 2*D - 2)``
    and never exceeds ``K``.
    """
    if K < 2:
        raise InvalidParameterError(f"K must be >= 2, got {K}")
    if not 1 <= D_max <= K:
        raise InvalidParameterError(f"D_max must be in [1, {K}], got {D_max}")
    numerator = 2 * K * D_max - K
    denominator = K + 2 * D_max - 2
    return numerator // denominator + 1


def save_csv(pilots: PilotDictionary, destination) -> None:
    """Write a dictionary as CSV: an ``L,K`` header, then row-major entries
    with real and imaginary parts interleaved."""
    S = pilots.entries
    lines = ["L,K", f"{pilots.L},{pilots.K}"]
    for row in S:
        cells = []
        for value in row:
            cells.append(f"{value.real:.17g}")
            cells.append(f"{value.imag:.17g}")
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def load_csv(source) -> PilotDictionary:
    """Read a dictionary written by :func:`save_csv`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if len(lines) < 2 or lines[0].replace(" ", "") != "L,K":
        raise InvalidParameterError("pilot CSV must start with an 'L,K' header")
    try:
        L, K = (int(tok) for tok in lines[1].split(","))
    except ValueError as exc:
        raise InvalidParameterError(f"malformed dimension row: {lines[1]!r}") from exc
    rows = lines[2:]
    if len(rows) != L:
        raise InvalidParameterError(f"expected {L} matrix rows, found {len(rows)}")
    entries = np.empty((L, K), dtype=complex)
    for i, row in enumerate(rows):
        cells = [float(tok) for tok in row.split(",")]
        if len(cells) != 2 * K:
            raise InvalidParameterError(f"row {i} must hold {2 * K} values, found {len(cells)}")
        values = np.asarray(cells).reshape(K, 2)
        entries[i] = values[:, 0] + 1j * values[:, 1]
    return PilotDictionary.from_matrix(entries, kind="user-supplied")
