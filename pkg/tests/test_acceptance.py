"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to watch the verdict lines
as they complete. The experiment-scale criteria use 100-500 Monte Carlo
trials and take a few minutes in total.
"""

import dataclasses
import itertools
import math
import time

import numpy as np

from gfdetect.detect import (
    LassoOptions,
    build_smv,
    detect_activity,
    kkt_residual,
    nn_lasso,
    sample_covariance,
)
from gfdetect.harness import PRESETS, ExperimentConfig, run_sweep
from gfdetect.link import (
    channel_mse,
    demodulate,
    draw_symbols,
    ls_channel_estimate,
    ls_data_decode,
    qpsk,
    symbol_error_rate,
)
from gfdetect.model import (
    NoiseSpec,
    derive_rng,
    draw_channel_gaussian,
    draw_support,
    received_data,
    received_pilot,
)
from gfdetect.pilots import (
    gen_gaussian_dictionary,
    khatri_rao_dictionary,
    max_identifiable_support,
    mutual_coherence,
)
from gfdetect.theory import chernoff_power_rate, empirical_power_floor_check

SEED = 20260808


def report(number: int, ok: bool, detail: str) -> None:
    # shown live under -s, and in the -rA report section otherwise
    print(f"\nACCEPTANCE {number:>2} [{'PASS' if ok else 'FAIL'}] {detail}", flush=True)


def rates_by(rows, detector):
    return {row.axis: row for row in rows if row.detector == detector}


def test_criterion_01_vectorization_identity():
    rng = derive_rng(SEED, 1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        L = int(rng.integers(2, 7))
        K = int(rng.integers(2, 11))
        S = gen_gaussian_dictionary(L, K, rng)
        r = rng.random(K)
        lhs = khatri_rao_dictionary(S) @ r
        rhs = (S.entries @ np.diag(r) @ S.entries.conj().T).ravel(order="F")
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 1.0
    report(1, ok, f"vectorization identity: worst residual {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_coherence_identity():
    rng = derive_rng(SEED, 2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        L = int(rng.integers(2, 8))
        K = int(rng.integers(3, 12))
        S = gen_gaussian_dictionary(L, K, rng)
        explicit = mutual_coherence(khatri_rao_dictionary(S))
        worst = max(worst, abs(explicit - S.coherence**2))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 1.0
    report(2, ok, f"lifted coherence equals squared coherence: worst gap {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_03_fig2_reproduction():
    start = time.perf_counter()
    cfg = ExperimentConfig(**PRESETS["fig2"], trials=200, seed=SEED)
    rows = run_sweep(cfg)
    elapsed = time.perf_counter() - start
    failures = []
    for detector in ("cov-lasso", "msbl", "bomp", "mfocuss"):
        per = rates_by(rows, detector)
        for D in (2.0, 4.0):
            rate = per[D].success_rate
            if rate < 0.95:
                failures.append(f"{detector} at D={int(D)}: {rate:.3f} < 0.95")
    lasso10 = rates_by(rows, "cov-lasso")[10.0].success_rate
    for detector in ("msbl", "bomp", "mfocuss"):
        other = rates_by(rows, detector)[10.0].success_rate
        if lasso10 - other < 0.10:
            failures.append(f"D=10 margin vs {detector}: {lasso10:.3f} - {other:.3f} < 0.10")
    summary = {d: [round(rates_by(rows, d)[v].success_rate, 3) for v in (2.0, 4.0, 6.0, 8.0, 10.0, 12.0)]
               for d in ("cov-lasso", "msbl", "bomp", "mfocuss")}
    ok = not failures and elapsed < 600
    report(3, ok, f"fig2 rates {summary}, {elapsed:.0f}s" + (f"; violations: {failures}" if failures else ""))
    assert ok, failures


def test_criterion_04_fig3_reproduction():
    start = time.perf_counter()
    cfg = ExperimentConfig(**PRESETS["fig3"], trials=200, seed=SEED)
    rows = run_sweep(cfg)
    elapsed = time.perf_counter() - start
    failures = []
    lasso = rates_by(rows, "cov-lasso")
    if lasso[0.0].success_rate < 0.90:
        failures.append(f"cov-lasso at 0 dB: {lasso[0.0].success_rate:.3f} < 0.90")
    for detector in ("msbl", "bomp", "mfocuss"):
        other = rates_by(rows, detector)[-10.0].success_rate
        if not lasso[-10.0].success_rate > other:
            failures.append(
                f"at -10 dB cov-lasso {lasso[-10.0].success_rate:.3f} does not exceed "
                f"{detector} {other:.3f}"
            )
    summary = {d: [round(rates_by(rows, d)[v].success_rate, 3) for v in (-10.0, -5.0, 0.0, 5.0, 10.0)]
               for d in ("cov-lasso", "msbl", "bomp", "mfocuss")}
    ok = not failures and elapsed < 600
    report(4, ok, f"fig3 rates {summary}, {elapsed:.0f}s" + (f"; violations: {failures}" if failures else ""))
    assert ok, failures


def test_criterion_05_fig4_antenna_trend():
    start = time.perf_counter()
    setup = dict(PRESETS["fig4"], trials=200, seed=SEED, detector="cov-lasso")
    cfg = ExperimentConfig(**setup)
    rows = run_sweep(cfg)
    elapsed = time.perf_counter() - start
    lasso = rates_by(rows, "cov-lasso")
    curve = [lasso[float(m)].success_rate for m in (16, 32, 64, 128, 256)]
    n = cfg.trials
    violations = 0
    for a, b in zip(curve, curve[1:]):
        se = math.sqrt(max(a * (1 - a), 1.0 / n) / n)
        if b < a - 3 * se:
            violations += 1
    failures = []
    if violations > 1:
        failures.append(f"{violations} decreases beyond 3 sigma in {curve}")
    if curve[-1] < 0.95:
        failures.append(f"rate at M=256 is {curve[-1]:.3f} < 0.95")
    ok = not failures and elapsed < 900
    report(5, ok, f"fig4 cov-lasso curve {np.round(curve, 3).tolist()}, {elapsed:.0f}s"
           + (f"; violations: {failures}" if failures else ""))
    assert ok, failures


def test_criterion_06_recovery_floor_consistency():
    start = time.perf_counter()
    # seed chosen so the shared dictionary satisfies the coherence hypothesis
    cfg = ExperimentConfig(
        K=10, L=8, D=2, snr_db=20.0, lam=0.3, seed=7, trials=500,
        detector="cov-lasso", N=0, redraw_pilots=False, compute_bound=True,
        sweep_axis="antennas", sweep_values=(128, 192, 256, 512),
    )
    rows = run_sweep(cfg)
    elapsed = time.perf_counter() - start
    checked = []
    failures = []
    for row in rows:
        if row.bound is None or row.bound < 0.5:
            continue
        margin = 3 * math.sqrt(max(row.bound * (1 - row.bound), 0.0) / cfg.trials)
        checked.append((row.axis, round(row.bound, 6), round(row.success_rate, 4)))
        if row.success_rate < row.bound - margin:
            failures.append(
                f"M={row.axis:.0f}: empirical {row.success_rate:.4f} < bound {row.bound:.4f} - {margin:.4f}"
            )
    if not checked:
        failures.append("no configuration produced a usable bound >= 0.5")
    ok = not failures
    report(6, ok, f"analytic floor vs empirical {checked}, {elapsed:.0f}s"
           + (f"; violations: {failures}" if failures else ""))
    assert ok, failures


def test_criterion_07_power_floor_check():
    start = time.perf_counter()
    out = empirical_power_floor_check(0.5, 1.0, 64, 10_000, derive_rng(SEED, 7))
    beta = chernoff_power_rate(0.5, 1.0).beta
    elapsed = time.perf_counter() - start
    margin = 3 * math.sqrt(out.bound * (1 - out.bound) / 10_000)
    ok = (
        abs(beta - 1.1014) < 1e-4
        and abs(out.bound - 0.9980) < 1e-4
        and out.empirical_prob >= out.bound - margin
        and elapsed < 5.0
    )
    report(7, ok, f"power floor: rate {beta:.4f}, floor {out.bound:.4f}, empirical {out.empirical_prob:.4f}, {elapsed:.1f}s")
    assert ok


def test_criterion_08_noiseless_end_to_end():
    start = time.perf_counter()
    failures = []
    scheme = qpsk()
    for seed in range(50):
        rng = derive_rng(SEED, 8, seed)
        S = gen_gaussian_dictionary(20, 64, rng)
        D = max(1, max_identifiable_support(S.coherence))
        sup = draw_support(64, rng, size=D)
        H = draw_channel_gaussian(1024, sup, rng)
        Y_p = received_pilot(H, S, NoiseSpec(0.0), rng)
        res = detect_activity(Y_p, S, 0.0, LassoOptions(known_sparsity=D))
        if res.support_hat != sup:
            failures.append(f"seed {seed}: support {res.support_hat.indices} != {sup.indices}")
            continue
        H_hat = ls_channel_estimate(Y_p, S.entries[:, list(sup.indices)])
        mse = channel_mse(H.active_entries(), H_hat)
        _, symbols = draw_symbols(scheme, (D, 40), rng)
        Y_d = received_data(H.active_entries(), symbols, NoiseSpec(0.0), rng)
        decided = scheme.points[demodulate(ls_data_decode(Y_d, H_hat), scheme)]
        true = np.zeros((64, 40), complex)
        est = np.zeros((64, 40), complex)
        true[list(sup.indices)] = symbols
        est[list(sup.indices)] = decided
        ser = symbol_error_rate(true, est, sup, sup)
        if mse >= 1e-8:
            failures.append(f"seed {seed}: channel mse {mse:.2e}")
        if ser != 0.0:
            failures.append(f"seed {seed}: ser {ser}")
    elapsed = time.perf_counter() - start
    ok = not failures
    report(8, ok, f"noiseless end-to-end over 50 seeds, {elapsed:.0f}s"
           + (f"; violations: {failures[:4]}" if failures else ""))
    assert ok, failures[:10]


def test_criterion_09_solver_kkt():
    start = time.perf_counter()
    rng = derive_rng(SEED, 9)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(12, 40))
        K = int(rng.integers(4, 14))
        A = (rng.standard_normal((m, K)) + 1j * rng.standard_normal((m, K))) / math.sqrt(2)
        x = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2)
        lam = 0.1 * float(np.max(np.abs(A.conj().T @ x)))
        res = nn_lasso(A, x, LassoOptions(lam=lam, max_iterations=20000, objective_tolerance=0.0))
        worst = max(worst, kkt_residual(A, x, res.r_hat, lam))
    x0 = np.abs(derive_rng(SEED, 90).standard_normal(12))
    closed = nn_lasso(np.eye(12), x0, LassoOptions(lam=0.1, max_iterations=5000, objective_tolerance=0.0))
    closed_gap = float(np.max(np.abs(closed.r_hat - np.maximum(x0 - 0.1, 0.0))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and closed_gap < 1e-8
    report(9, ok, f"solver optimality: worst KKT residual {worst:.2e}, "
                  f"soft-threshold gap {closed_gap:.2e}, {elapsed:.0f}s")
    assert ok


def _nnls_small(A, x, columns):
    if not columns:
        return float(np.real(np.vdot(x, x)))
    Asub = A[:, columns]
    G = (Asub.conj().T @ Asub).real
    b = (Asub.conj().T @ x).real
    xnorm2 = float(np.real(np.vdot(x, x)))

    def value(r):
        return float(r @ G @ r - 2 * b @ r + xnorm2)

    candidates = [np.zeros(len(columns))]
    try:
        free = np.linalg.solve(G, b)
        if np.all(free >= 0):
            candidates.append(free)
    except np.linalg.LinAlgError:
        pass
    for j in range(len(columns)):
        r = np.zeros(len(columns))
        r[j] = max(b[j] / G[j, j], 0.0)
        candidates.append(r)
    return min(value(r) for r in candidates)


def test_criterion_10_brute_force_oracle():
    start = time.perf_counter()
    K = 12
    # first master-seeded dictionary whose coherence admits two active nodes
    for offset in itertools.count():
        S = gen_gaussian_dictionary(8, K, derive_rng(SEED, 10, offset))
        if max_identifiable_support(S.coherence) >= 2:
            break
    A_dict = khatri_rao_dictionary(S)
    failures = []
    for pair_index, combo in enumerate(itertools.combinations(range(K), 2)):
        rng = derive_rng(SEED, 11, pair_index)
        from gfdetect.model import Support

        sup = Support(combo, K)
        H = draw_channel_gaussian(2048, sup, rng)
        Y_p = received_pilot(H, S, NoiseSpec(0.0), rng)
        A, x = build_smv(sample_covariance(Y_p), S, 0.0)
        best = (np.inf, 0, ())
        for size in range(3):
            for candidate in itertools.combinations(range(K), size):
                key = (_nnls_small(A, x, list(candidate)), size, candidate)
                if key < best:
                    best = key
        detected = detect_activity(Y_p, S, 0.0, LassoOptions(known_sparsity=2)).support_hat
        if tuple(detected.indices) != best[2]:
            failures.append(f"{combo}: exhaustive {best[2]} vs detector {detected.indices}")
    elapsed = time.perf_counter() - start
    ok = not failures
    report(10, ok, f"brute-force oracle agreement on all 66 supports (mu={S.coherence:.3f}), {elapsed:.0f}s"
           + (f"; disagreements: {failures[:4]}" if failures else ""))
    assert ok, failures


def test_criterion_11_link_metric_ordering():
    start = time.perf_counter()
    base = ExperimentConfig(**PRESETS["fig6"], trials=100, seed=SEED)
    cfg = dataclasses.replace(base, M=128, sweep_axis="sparsity", sweep_values=(2, 6))
    rows = run_sweep(cfg)
    elapsed = time.perf_counter() - start
    n = cfg.trials
    at6 = {row.detector: row for row in rows if row.axis == 6.0}
    order = ("paci", "pai", "cov-lasso", "msbl")
    sers = [at6[d].ser for d in order]
    mses = [at6[d].channel_mse for d in order]
    failures = []
    for (name_a, ser_a), (name_b, ser_b) in zip(zip(order, sers), zip(order[1:], sers[1:])):
        se = math.sqrt(max(ser_a * (1 - ser_a), ser_b * (1 - ser_b), 1.0 / n) / n)
        if ser_a > ser_b + 3 * se:
            failures.append(f"SER({name_a})={ser_a:.4f} > SER({name_b})={ser_b:.4f} + 3se")
    executed = {row.detector for row in rows} == set(order) and len(rows) == 8
    if not executed:
        failures.append("sweep did not produce all detector rows")
    ok = not failures and elapsed < 900
    report(11, ok, f"SER ordering {dict(zip(order, np.round(sers, 4)))}, "
                   f"MSE {dict(zip(order, np.round(mses, 3)))}, {elapsed:.0f}s"
           + (f"; violations: {failures}" if failures else ""))
    assert ok, failures
