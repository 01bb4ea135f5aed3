"""Monte Carlo experiment harness.

A sweep runs ``trials`` independent trials per axis value, each trial being
one full pipeline pass: draw activity and channel, synthesize pilot and data
observations, run the selected detectors, estimate channels and decode data
for each detected support, and score success (exact support match), symbol
error rate, and channel MSE. Per-trial random streams are derived from
``(seed, sweep_point, trial_index)`` so results are independent of execution
order and worker count.
"""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .baselines import MmvProblem, bomp, mfocuss, msbl
from .detect import LassoOptions, detect_activity
from .errors import (
    ConditionViolatedError,
    ConfigError,
    InvalidParameterError,
    SingularSystemError,
)
from .link import (
    LinkResult,
    ModulationScheme,
    channel_mse,
    demodulate,
    despread_symbols,
    draw_symbols,
    ls_channel_estimate,
    ls_data_decode,
    qpsk,
    spread_symbols,
    symbol_error_rate,
)
from .model import (
    NoiseSpec,
    Support,
    complex_normal,
    derive_rng,
    draw_channel_gaussian,
    draw_channel_ula,
    draw_support,
    received_data,
    received_pilot,
)
from .pilots import PilotDictionary, gen_gaussian_dictionary

__all__ = [
    "ExperimentConfig",
    "TrialMetrics",
    "TrialRecord",
    "MetricsRow",
    "PRESETS",
    "run_trial",
    "run_sweep",
    "emit_csv",
    "parse_sweep",
    "parse_config_file",
    "apply_settings",
]

DETECTOR_NAMES = ("cov-lasso", "msbl", "bomp", "mfocuss")
GENIE_NAMES = ("pai", "paci")
SWEEP_AXES = ("none", "sparsity", "snr", "antennas")

_PILOT_STREAM = 0x70494C4F  # stream key for the shared dictionary draw


@dataclass(frozen=True)
class ExperimentConfig:
    """All scenario and solver parameters for one experiment."""

    K: int = 64
    L: int = 20
    M: int = 128
    D: int = 10
    activity_prob: float | None = None
    snr_db: float = 0.0
    trials: int = 200
    seed: int = 0
    detector: str = "cov-lasso"
    sweep_axis: str = "none"
    sweep_values: tuple[float, ...] = ()
    N: int = 40
    modulation: str = "qpsk"
    channel: str = "gaussian"
    paths: int = 200
    lam: float | None = None
    max_iterations: int = 2000
    objective_tolerance: float = 1e-10
    threshold_ratio: float = 0.1
    use_known_sparsity: bool = True
    spread_length: int = 0
    redraw_pilots: bool = True
    compute_bound: bool = False
    workers: int = 1
    stream: int = 0

    def validate(self) -> None:
        if self.K < 1 or self.L < 1 or self.M < 1:
            raise ConfigError(f"K, L, M must be >= 1 (got K={self.K}, L={self.L}, M={self.M})")
        if self.activity_prob is None and not 0 <= self.D <= self.K:
            raise ConfigError(f"D must lie in [0, {self.K}], got {self.D}")
        if self.activity_prob is not None and not 0.0 <= self.activity_prob <= 1.0:
            raise ConfigError(f"activity_prob must lie in [0, 1], got {self.activity_prob}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.N < 0:
            raise ConfigError(f"N must be >= 0, got {self.N}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.paths < 1:
            raise ConfigError(f"paths must be >= 1, got {self.paths}")
        if self.spread_length < 0:
            raise ConfigError(f"spread_length must be >= 0, got {self.spread_length}")
        if self.modulation != "qpsk":
            raise ConfigError(f"unknown modulation {self.modulation!r}")
        if self.channel not in ("gaussian", "ula"):
            raise ConfigError(f"unknown channel model {self.channel!r}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis != "none" and not self.sweep_values:
            raise ConfigError("sweep requires at least one axis value")
        if self.sweep_axis == "sparsity" and self.activity_prob is not None:
            raise ConfigError("sparsity sweeps require fixed-size activity")
        self.detector_list()
        try:
            self.lasso_options(self.D if self.use_known_sparsity else None)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def detector_list(self) -> tuple[str, ...]:
        names: list[str] = []
        for token in self.detector.split(","):
            token = token.strip()
            if not token:
                continue
            if token == "all":
                names.extend(DETECTOR_NAMES)
            elif token in DETECTOR_NAMES or token in GENIE_NAMES:
                names.append(token)
            else:
                raise ConfigError(f"unknown detector {token!r}")
        if not names:
            raise ConfigError("no detector selected")
        # preserve order, drop duplicates
        return tuple(dict.fromkeys(names))

    def lasso_options(self, known_sparsity: int | None) -> LassoOptions:
        return LassoOptions(
            lam=self.lam,
            max_iterations=self.max_iterations,
            objective_tolerance=self.objective_tolerance,
            threshold_ratio=self.threshold_ratio,
            known_sparsity=known_sparsity,
        )


@dataclass(frozen=True)
class TrialMetrics:
    success: bool
    ser: float
    channel_mse: float
    # wall clock is reported but never part of record identity
    runtime_ms: float = field(compare=False, default=0.0)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    sparsity: int
    metrics: dict[str, TrialMetrics]


@dataclass(frozen=True)
class MetricsRow:
    """One aggregated CSV row: one detector at one axis value."""

    axis: float
    detector: str
    success_rate: float
    ser: float
    channel_mse: float
    runtime_ms: float
    bound: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.success_rate <= 1.0:
            raise InvalidParameterError(f"success_rate must lie in [0, 1], got {self.success_rate}")
        if not 0.0 <= self.ser <= 1.0:
            raise InvalidParameterError(f"ser must lie in [0, 1], got {self.ser}")


PRESETS: dict[str, dict] = {
    # detection rate vs activity level
    "fig2": dict(sweep_axis="sparsity", sweep_values=(2, 4, 6, 8, 10, 12),
                 K=64, L=20, M=128, snr_db=0.0, detector="all"),
    # detection rate vs SNR at fixed activity
    "fig3": dict(sweep_axis="snr", sweep_values=(-10, -5, 0, 5, 10),
                 K=64, L=20, M=128, D=10, detector="all"),
    # detection rate vs antenna count
    "fig4": dict(sweep_axis="antennas", sweep_values=(16, 32, 64, 128, 256),
                 K=64, L=20, D=10, snr_db=0.0, detector="all"),
    # symbol error rate vs SNR, with genie references
    "fig5": dict(sweep_axis="snr", sweep_values=(-10, -5, 0, 5, 10),
                 K=64, L=20, M=500, D=6, N=40, detector="cov-lasso,msbl,pai,paci"),
    # symbol error rate vs activity level
    "fig6": dict(sweep_axis="sparsity", sweep_values=(2, 4, 6, 8, 10, 12),
                 K=64, L=20, M=500, snr_db=10.0, N=40, detector="cov-lasso,msbl,pai,paci"),
    # channel estimation error vs activity level
    "fig7": dict(sweep_axis="sparsity", sweep_values=(2, 4, 6, 8, 10, 12),
                 K=64, L=20, M=500, snr_db=10.0, N=40, detector="cov-lasso,msbl,pai,paci"),
    # channel estimation error vs SNR
    "fig8": dict(sweep_axis="snr", sweep_values=(-10, -5, 0, 5, 10),
                 K=64, L=20, M=500, D=6, N=40, detector="cov-lasso,msbl,pai,paci"),
}


def _shared_pilots(config: ExperimentConfig) -> PilotDictionary:
    return gen_gaussian_dictionary(config.L, config.K, derive_rng(config.seed, _PILOT_STREAM))


def _run_detector(
    name: str,
    Y_p: np.ndarray,
    pilots: PilotDictionary,
    sigma_w2: float,
    support_true: Support,
    config: ExperimentConfig,
) -> Support:
    """Dispatch one detector.

    The comparison protocol mirrors the usual benchmark convention: the
    covariance detector consumes the activity-level prior when
    ``use_known_sparsity`` is on, block-OMP always needs it, while MSBL and
    M-FOCUSS decide the support from their own pruning rules.
    """
    D_true = support_true.size
    if name == "cov-lasso":
        D_known = D_true if config.use_known_sparsity else None
        result = detect_activity(Y_p, pilots, sigma_w2, config.lasso_options(D_known))
        return result.support_hat
    if name in GENIE_NAMES:
        return support_true
    problem = MmvProblem.from_received_pilot(Y_p, pilots, sigma_w2)
    if name == "msbl":
        return msbl(problem)
    if name == "bomp":
        if D_true == 0:
            return Support((), config.K)
        return bomp(problem, D_true)
    if name == "mfocuss":
        return mfocuss(problem)
    raise ConfigError(f"unknown detector {name!r}")


def _link_metrics(
    name: str,
    support_true: Support,
    support_hat: Support,
    H_entries: np.ndarray,
    pilots: PilotDictionary,
    Y_p: np.ndarray,
    Y_d: np.ndarray | None,
    true_symbols: np.ndarray,
    scheme: ModulationScheme,
    codes: np.ndarray | None,
    config: ExperimentConfig,
) -> LinkResult:
    """Estimate/decode for one detected support and score it against truth.

    Channel MSE runs over the true support (a missed node contributes its
    full normalized power), SER over the union of true and detected
    supports. A singular estimation or decoding step degrades to all-zero
    decisions rather than aborting the trial.
    """
    M = H_entries.shape[0]
    detected = list(support_hat.indices)
    if name == "paci":
        H_hat = H_entries[:, detected]
    else:
        try:
            H_hat = ls_channel_estimate(Y_p, pilots.entries[:, detected])
        except SingularSystemError:
            H_hat = None

    true_active = list(support_true.indices)
    if not true_active or name == "paci":
        mse = 0.0
    elif H_hat is None:
        mse = float(len(true_active))
    else:
        aligned = np.zeros((M, len(true_active)), dtype=complex)
        position = {k: j for j, k in enumerate(detected)}
        for col, k in enumerate(true_active):
            if k in position:
                aligned[:, col] = H_hat[:, position[k]]
        mse = channel_mse(H_entries[:, true_active], aligned)

    N = true_symbols.shape[1]
    soft = None
    indices = None
    est_symbols = np.zeros_like(true_symbols)
    if Y_d is not None and H_hat is not None and detected:
        try:
            soft = ls_data_decode(Y_d, H_hat)
        except SingularSystemError:
            soft = None
        if soft is not None:
            if codes is not None:
                soft = despread_symbols(soft, codes[detected])
            indices = demodulate(soft, scheme)
            est_symbols[detected] = scheme.points[indices]
    ser = symbol_error_rate(true_symbols, est_symbols, support_true, support_hat)
    return LinkResult(
        H_hat=H_hat if H_hat is not None else np.zeros((M, 0), dtype=complex),
        D_soft=soft if soft is not None else np.zeros((0, N), dtype=complex),
        symbol_indices=indices if indices is not None else np.zeros((0, N), dtype=int),
        ser=ser,
        channel_mse=mse,
    )


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialRecord:
    """One full pipeline pass, deterministic given ``(seed, stream, trial_index)``."""
    rng = derive_rng(config.seed, config.stream, trial_index)
    pilots = (
        gen_gaussian_dictionary(config.L, config.K, rng)
        if config.redraw_pilots
        else _shared_pilots(config)
    )
    if config.activity_prob is not None:
        support = draw_support(config.K, rng, prob=config.activity_prob)
    else:
        support = draw_support(config.K, rng, size=config.D)
    if config.channel == "ula":
        H = draw_channel_ula(config.M, config.paths, support, rng)
    else:
        H = draw_channel_gaussian(config.M, support, rng)
    noise = NoiseSpec.from_snr_db(config.snr_db)
    Y_p = received_pilot(H, pilots, noise, rng)

    scheme = qpsk()
    true_symbols = np.zeros((config.K, config.N), dtype=complex)
    codes = None
    Y_d = None
    if config.N > 0:
        _, values = draw_symbols(scheme, (support.size, config.N), rng)
        true_symbols[list(support.indices)] = values
        tx = values
        if config.spread_length > 1:
            codes = complex_normal(rng, (config.K, config.spread_length))
            codes /= np.linalg.norm(codes, axis=1, keepdims=True)
            tx = spread_symbols(values, codes[list(support.indices)])
        Y_d = received_data(H.active_entries(), tx, noise, rng)

    metrics: dict[str, TrialMetrics] = {}
    for name in config.detector_list():
        start = time.perf_counter()
        support_hat = _run_detector(name, Y_p, pilots, noise.variance, support, config)
        runtime_ms = (time.perf_counter() - start) * 1e3
        link = _link_metrics(
            name, support, support_hat, H.entries, pilots, Y_p, Y_d,
            true_symbols, scheme, codes, config,
        )
        metrics[name] = TrialMetrics(
            success=support_hat.indices == support.indices,
            ser=link.ser,
            channel_mse=link.channel_mse,
            runtime_ms=runtime_ms,
        )
    return TrialRecord(trial_index, support.size, metrics)


def _trial_task(args: tuple[ExperimentConfig, int]) -> TrialRecord:
    return run_trial(*args)


def _sweep_points(config: ExperimentConfig) -> list[tuple[float, ExperimentConfig]]:
    if config.sweep_axis == "none":
        return [(0.0, config)]
    points = []
    for i, value in enumerate(config.sweep_values):
        if config.sweep_axis == "sparsity":
            if value != int(value) or not 0 <= int(value) <= config.K:
                raise ConfigError(f"sparsity values must be integers in [0, {config.K}], got {value}")
            pc = dataclasses.replace(config, D=int(value), stream=i)
        elif config.sweep_axis == "snr":
            pc = dataclasses.replace(config, snr_db=float(value), stream=i)
        else:  # antennas
            if value != int(value) or int(value) < 1:
                raise ConfigError(f"antenna counts must be positive integers, got {value}")
            pc = dataclasses.replace(config, M=int(value), stream=i)
        points.append((float(value), pc))
    return points


def _point_bound(pc: ExperimentConfig) -> float | None:
    """Theoretical success floor for this point, when it is well defined.

    Needs a fixed penalty, a shared pilot dictionary, the Gaussian channel
    with unit variances, a fixed activity level, and nonzero noise.
    """
    if (
        pc.lam is None
        or pc.redraw_pilots
        or pc.channel != "gaussian"
        or pc.activity_prob is not None
        or pc.D < 1
    ):
        return None
    noise = NoiseSpec.from_snr_db(pc.snr_db)
    if noise.variance <= 0:
        return None
    pilots = _shared_pilots(pc)
    sigma_w = math.sqrt(noise.variance)
    try:
        inputs = theory.BoundInputs(
            lam=pc.lam,
            mu=pilots.coherence,
            D=pc.D,
            L=pc.L,
            M=pc.M,
            sigma_max_1=1.0,
            sigma_max_2=1.0,
            sigma_w_max_1=sigma_w,
            sigma_w_max_2=sigma_w,
            S_infnorm=float(np.max(np.abs(pilots.entries))),
            sigma_min2=1.0,
        )
        return theory.evaluate_recovery_bound(inputs).bound
    except (InvalidParameterError, ConditionViolatedError):
        return None


def run_sweep(config: ExperimentConfig) -> list[MetricsRow]:
    """Run all sweep points and aggregate per-detector metric rows."""
    config.validate()
    rows: list[MetricsRow] = []
    for value, pc in _sweep_points(config):
        if pc.workers > 1:
            tasks = [(pc, i) for i in range(pc.trials)]
            with ProcessPoolExecutor(max_workers=pc.workers) as pool:
                records = list(pool.map(_trial_task, tasks, chunksize=max(1, pc.trials // (8 * pc.workers))))
        else:
            records = [run_trial(pc, i) for i in range(pc.trials)]
        bound = _point_bound(pc) if pc.compute_bound else None
        for name in pc.detector_list():
            per = [rec.metrics[name] for rec in records]
            rows.append(
                MetricsRow(
                    axis=value,
                    detector=name,
                    success_rate=float(np.mean([m.success for m in per])),
                    ser=float(np.mean([m.ser for m in per])),
                    channel_mse=float(np.mean([m.channel_mse for m in per])),
                    runtime_ms=float(np.mean([m.runtime_ms for m in per])),
                    bound=bound if name == "cov-lasso" else None,
                )
            )
    return rows


CSV_HEADER = "axis,detector,success_rate,ser,channel_mse,runtime_ms,bound"


def emit_csv(rows: list[MetricsRow], destination) -> None:
    """Write aggregated rows as CSV with six significant digits.

    ``destination`` may be a path or an open text file. The ``bound`` cell is
    empty for rows without a computed bound.
    """
    if not rows:
        raise InvalidParameterError("no rows to emit")
    lines = [CSV_HEADER]
    for row in rows:
        bound = "" if row.bound is None else f"{row.bound:.6g}"
        lines.append(
            f"{row.axis:.6g},{row.detector},{row.success_rate:.6g},{row.ser:.6g},"
            f"{row.channel_mse:.6g},{row.runtime_ms:.6g},{bound}"
        )
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def parse_sweep(spec: str) -> tuple[str, tuple[float, ...]]:
    """Parse ``axis:start:step:stop`` or ``axis:v1,v2,...`` sweep syntax."""
    parts = spec.split(":")
    axis = parts[0].strip()
    if axis not in ("sparsity", "snr", "antennas"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    try:
        if len(parts) == 4:
            start, step, stop = (float(p) for p in parts[1:])
            if step == 0 or (stop - start) * step < 0:
                raise ConfigError(f"unreachable sweep range in {spec!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = tuple(start + i * step for i in range(count))
        elif len(parts) == 2:
            values = tuple(float(tok) for tok in parts[1].split(",") if tok.strip())
        else:
            raise ConfigError(f"malformed sweep spec {spec!r}")
    except ValueError as exc:
        raise ConfigError(f"malformed sweep spec {spec!r}") from exc
    if not values:
        raise ConfigError(f"sweep spec {spec!r} has no values")
    return axis, values


_BOOL_KEYS = {"known_sparsity", "redraw_pilots", "bound"}
_INT_KEYS = {"K", "L", "M", "D", "trials", "seed", "workers", "N", "paths", "max_iters", "spread"}
_FLOAT_KEYS = {"snr", "activity_prob", "lam", "tau", "tol"}
_STR_KEYS = {"detector", "modulation", "channel"}

_FIELD_BY_KEY = {
    "K": "K", "L": "L", "M": "M", "D": "D",
    "snr": "snr_db", "activity_prob": "activity_prob",
    "trials": "trials", "seed": "seed", "workers": "workers",
    "N": "N", "paths": "paths", "max_iters": "max_iterations",
    "spread": "spread_length", "lam": "lam", "tau": "threshold_ratio",
    "tol": "objective_tolerance", "detector": "detector",
    "modulation": "modulation", "channel": "channel",
    "known_sparsity": "use_known_sparsity", "redraw_pilots": "redraw_pilots",
    "bound": "compute_bound",
}


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"boolean expected for {key}, got {text!r}")


def parse_config_file(path) -> dict[str, str]:
    """Read flat ``key=value`` settings; '#' starts a comment."""
    settings: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            settings[key.strip()] = value.strip()
    return settings


def apply_settings(config: ExperimentConfig, settings: dict[str, str]) -> ExperimentConfig:
    """Overlay string settings (config file or CLI) onto a configuration."""
    updates: dict = {}
    for key, value in settings.items():
        if key == "sweep":
            axis, values = parse_sweep(value)
            updates["sweep_axis"] = axis
            updates["sweep_values"] = values
            continue
        if key not in _FIELD_BY_KEY:
            raise ConfigError(f"unknown configuration key {key!r}")
        field = _FIELD_BY_KEY[key]
        try:
            if key in _BOOL_KEYS:
                updates[field] = _parse_bool(value, key)
            elif key in _INT_KEYS:
                updates[field] = int(value)
            elif key in _FLOAT_KEYS:
                if key in ("lam", "activity_prob") and value.strip().lower() in ("auto", "none", ""):
                    updates[field] = None
                else:
                    updates[field] = float(value)
            else:
                updates[field] = value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return dataclasses.replace(config, **updates)
