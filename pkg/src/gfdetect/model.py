"""Activity patterns, channel draws, and received-signal synthesis.

All randomness flows through explicit ``numpy.random.Generator`` instances.
Monte Carlo streams are derived from ``(master_seed, *stream_indices)`` so
that trials are reproducible, order-independent, and safe to run in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "Support",
    "ChannelMatrix",
    "NoiseSpec",
    "derive_rng",
    "complex_normal",
    "draw_support",
    "steering_vector",
    "draw_channel_ula",
    "draw_channel_gaussian",
    "received_pilot",
    "received_data",
]


def derive_rng(master_seed: int, *stream: int) -> np.random.Generator:
    """Build an independent generator keyed by ``(master_seed, *stream)``.

    Two calls with the same key return generators producing identical
    sequences; distinct keys give statistically independent streams.
    """
    entropy = (int(master_seed),) + tuple(int(s) for s in stream)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples.

    The variance is split evenly between the real and imaginary parts, so
    ``E[|z|^2] == variance``.
    """
    if variance < 0:
        raise InvalidParameterError(f"variance must be nonnegative, got {variance}")
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class Support:
    """Set of active node indices out of ``K`` total nodes.

    Indices are stored strictly increasing; ``size`` is the activity level.
    """

    indices: tuple[int, ...]
    K: int

    def __post_init__(self) -> None:
        if self.K < 0:
            raise InvalidParameterError(f"K must be nonnegative, got {self.K}")
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 or i >= self.K for i in idx):
            raise InvalidParameterError(f"support indices must lie in [0, {self.K})")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidParameterError("support indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)

    def mask(self) -> np.ndarray:
        """Boolean activity mask of length ``K``."""
        m = np.zeros(self.K, dtype=bool)
        m[list(self.indices)] = True
        return m

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Support":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(int(i) for i in np.flatnonzero(mask)), mask.size)


@dataclass(frozen=True)
class ChannelMatrix:
    """Flat-fading uplink channel: ``M`` antennas by ``K`` nodes.

    Columns outside the support are exactly zero. ``variances`` holds the
    per-node channel power for the active nodes, aligned with
    ``support.indices``.
    """

    entries: np.ndarray
    support: Support
    variances: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[1] != self.support.K:
            raise InvalidParameterError(
                f"channel must be 2-D with {self.support.K} columns, got {entries.shape}"
            )
        if not np.all(np.isfinite(entries)):
            raise InvalidParameterError("channel entries must be finite")
        variances = self.variances
        if variances is None:
            variances = np.ones(self.support.size)
        variances = np.asarray(variances, dtype=float)
        if variances.shape != (self.support.size,):
            raise InvalidParameterError("one variance per active node required")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "variances", variances)

    @property
    def num_antennas(self) -> int:
        return self.entries.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.entries.shape[1]

    def active_entries(self) -> np.ndarray:
        """The ``M x D`` block of active columns, in support order."""
        return self.entries[:, list(self.support.indices)]


@dataclass(frozen=True)
class NoiseSpec:
    """Receiver noise level, per complex entry.

    With unit average symbol energy the operating SNR is ``1 / variance``.
    """

    variance: float

    def __post_init__(self) -> None:
        if self.variance < 0 or not math.isfinite(self.variance):
            raise InvalidParameterError(f"noise variance must be >= 0, got {self.variance}")

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseSpec":
        return cls(10.0 ** (-snr_db / 10.0))

    @property
    def snr_db(self) -> float:
        if self.variance == 0:
            return math.inf
        return -10.0 * math.log10(self.variance)


def draw_support(
    K: int,
    rng: np.random.Generator,
    *,
    size: int | None = None,
    prob: float | None = None,
) -> Support:
    """Draw an activity pattern over ``K`` nodes.

    Exactly one of ``size`` (uniformly random subset of that cardinality) or
    ``prob`` (independent Bernoulli activation per node) must be given.
    """
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    if (size is None) == (prob is None):
        raise InvalidParameterError("specify exactly one of size= or prob=")
    if size is not None:
        if not 0 <= size <= K:
            raise InvalidParameterError(f"size must be in [0, {K}], got {size}")
        idx = np.sort(rng.choice(K, size=int(size), replace=False))
    else:
        if not 0.0 <= prob <= 1.0:
            raise InvalidParameterError(f"prob must be in [0, 1], got {prob}")
        idx = np.flatnonzero(rng.random(K) < prob)
    return Support(tuple(int(i) for i in idx), K)


def steering_vector(M: int, theta: float, spacing_ratio: float = 0.5) -> np.ndarray:
    """Uniform-linear-array response for arrival angle ``theta`` (radians).

    Element ``m`` equals ``exp(-2j*pi*m*spacing_ratio*cos(theta))``; the
    default spacing is half a wavelength.
    """
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    m = np.arange(M)
    return np.exp(-2j * np.pi * m * spacing_ratio * math.cos(theta))


def draw_channel_ula(
    M: int,
    paths: int,
    support: Support,
    rng: np.random.Generator,
    spacing_ratio: float = 0.5,
) -> ChannelMatrix:
    """Geometric multipath channel on a uniform linear array.

    Each active column superposes ``paths`` planar wavefronts with standard
    complex Gaussian gains and arrival angles uniform on [-pi/2, pi/2]; the
    1/sqrt(paths) normalization keeps the per-entry power at one. With many
    paths the columns are well approximated by the Gaussian model.
    """
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    if paths < 1:
        raise InvalidParameterError(f"paths must be >= 1, got {paths}")
    H = np.zeros((M, support.K), dtype=complex)
    antenna = np.arange(M)[:, None]
    for k in support.indices:
        gains = complex_normal(rng, paths)
        thetas = rng.uniform(-np.pi / 2, np.pi / 2, paths)
        steer = np.exp(-2j * np.pi * antenna * (spacing_ratio * np.cos(thetas))[None, :])
        H[:, k] = steer @ gains / math.sqrt(paths)
    return ChannelMatrix(H, support, np.ones(support.size))


def draw_channel_gaussian(
    M: int,
    support: Support,
    rng: np.random.Generator,
    variances=None,
) -> ChannelMatrix:
    """Favorable-propagation channel: i.i.d. complex Gaussian active columns.

    ``variances`` may be a scalar or one value per active node (default 1);
    entries are uncorrelated across antennas and across nodes.
    """
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    var = np.broadcast_to(np.asarray(1.0 if variances is None else variances, dtype=float),
                          (support.size,)).copy()
    if np.any(var <= 0):
        raise InvalidParameterError("active-node variances must be positive")
    H = np.zeros((M, support.K), dtype=complex)
    if support.size:
        block = complex_normal(rng, (M, support.size)) * np.sqrt(var)[None, :]
        H[:, list(support.indices)] = block
    return ChannelMatrix(H, support, var)


def _as_matrix(obj) -> np.ndarray:
    entries = getattr(obj, "entries", obj)
    return np.asarray(entries)


def received_pilot(H, pilots, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Received training-phase signal ``H @ pilots^H`` plus white noise.

    ``H`` is an ``M x K`` channel (or :class:`ChannelMatrix`), ``pilots`` an
    ``L x K`` dictionary (or :class:`~gfdetect.pilots.PilotDictionary`).
    Returns the ``M x L`` observation. A zero noise variance yields the exact
    matrix product.
    """
    Hm = _as_matrix(H)
    S = _as_matrix(pilots)
    if Hm.ndim != 2 or S.ndim != 2 or Hm.shape[1] != S.shape[1]:
        raise InvalidParameterError(
            f"channel ({Hm.shape}) and pilots ({S.shape}) must share a node count"
        )
    Y = Hm @ S.conj().T
    if noise.variance > 0:
        Y = Y + complex_normal(rng, Y.shape, noise.variance)
    return Y


def received_data(
    H_active: np.ndarray,
    symbols: np.ndarray,
    noise: NoiseSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Received data-phase signal ``H_active @ symbols`` plus white noise.

    ``H_active`` is ``M x K_a`` (active columns only) and ``symbols`` is the
    ``K_a x N`` matrix of modulation symbols.
    """
    Hm = np.asarray(H_active)
    D = np.asarray(symbols)
    if Hm.ndim != 2 or D.ndim != 2 or Hm.shape[1] != D.shape[0]:
        raise InvalidParameterError(
            f"inner dimensions must agree, got {Hm.shape} and {D.shape}"
        )
    Y = Hm @ D
    if noise.variance > 0:
        Y = Y + complex_normal(rng, Y.shape, noise.variance)
    return Y
