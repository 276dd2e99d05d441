"""Acceptance gate: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion, including the measured margin and wall time.
"""

import math
import subprocess
import sys
import time

import numpy as np

from riskcurve.designer import (
    Arrow,
    choose_ascent_params,
    design_curve,
    parse_arrows,
    verify_plan,
)
from riskcurve.laws import Gaussian, ProductLaw, StdGaussian, TrimodalMix
from riskcurve.pinv import (
    m_matrix_spectrum,
    pinv_direct,
    projection_quantities,
    stack_row_pinv_over,
    stack_row_pinv_under,
)
from riskcurve.risk import (
    ZeroBeta,
    conditional_stacked_mean,
    diag_inv_z,
    diag_noncentral_dominance,
    estimate_delta,
    estimate_overparam_norms,
    paired_loss_samples,
)

THREADS = 4


def report(num, name, ok, detail, elapsed, limit):
    status = "PASS" if ok and elapsed < limit else "FAIL"
    print(f"{status} criterion {num:02d} ({name}): {detail} [{elapsed:.1f}s < {limit:.0f}s]")
    assert ok, f"criterion {num} ({name}): {detail}"
    assert elapsed < limit, f"criterion {num} exceeded its runtime budget ({elapsed:.1f}s)"


def test_criterion_01_incremental_pinv_oracle():
    t0 = time.time()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(5, 31))
        d = int(rng.integers(1, n - 1))
        a = rng.standard_normal((n, d))
        b = rng.standard_normal(n)
        new = stack_row_pinv_under(pinv_direct(a), b)
        direct = pinv_direct(np.hstack([a, b[:, None]]))
        worst = max(worst, np.linalg.norm(new.pinv - direct.pinv) / np.linalg.norm(direct.pinv))
    for _ in range(1000):
        n = int(rng.integers(4, 13))
        d = int(rng.integers(n, n + 41))
        a = rng.standard_normal((n, d))
        b = rng.standard_normal(n)
        new = stack_row_pinv_over(pinv_direct(a), b)
        direct = pinv_direct(np.hstack([a, b[:, None]]))
        worst = max(worst, np.linalg.norm(new.pinv - direct.pinv) / np.linalg.norm(direct.pinv))
    report(
        1, "incremental-pinv-oracle", worst <= 1e-9,
        f"max rel Frobenius err {worst:.2e} <= 1e-9 over 2000 cases",
        time.time() - t0, 30.0,
    )


def test_criterion_02_m_matrix_spectrum():
    t0 = time.time()
    rng = np.random.default_rng(1002)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(6, 17))
        d = int(rng.integers(1, n - 2))
        a = rng.standard_normal((n, d))
        b = rng.standard_normal(n)
        quant = projection_quantities(pinv_direct(a), b)
        z = quant["z"]
        spec = m_matrix_spectrum(quant["P"], quant["Q"], z)
        worst = max(
            worst,
            abs(spec.eig_low - (1.0 - 1.0 / z)),
            abs(spec.eig_high - 1.0),
            abs(spec.trace - (2.0 - 1.0 / z)),
            0.0 if spec.residual_rank == 2 else 1.0,
        )
    report(
        2, "m-matrix-spectrum", worst <= 1e-8,
        f"max abs deviation {worst:.2e} <= 1e-8 over 500 instances",
        time.time() - t0, 10.0,
    )


def test_criterion_03_pathwise_underparam_monotonicity():
    t0 = time.time()
    cases = [
        (StdGaussian(), 12, 4),
        (StdGaussian(), 20, 15),
        (Gaussian(0.3), 12, 4),
        (Gaussian(0.3), 9, 7),
        (TrimodalMix(0.2, 1.0), 12, 4),
        (TrimodalMix(0.2, 1.0), 15, 10),
    ]
    violations = 0
    total = 0
    per_case = 10_000 // len(cases) + 1
    for i, (law, n, d) in enumerate(cases):
        plaw = ProductLaw.uniform(law, d)
        l0, l1, _ = paired_loss_samples(
            plaw, d, n, law, 1.0, ZeroBeta(), per_case, 2000 + i, threads=THREADS
        )
        violations += int((l1 - l0 < -1e-10 * (1.0 + l0)).sum())
        total += per_case
    report(
        3, "pathwise-monotonicity", violations == 0,
        f"{violations} violations beyond 1e-10 relative in {total} paired draws",
        time.time() - t0, 60.0,
    )


def test_criterion_04_inv_z_closed_form_and_bound():
    t0 = time.time()
    n, d = 20, 5
    est = diag_inv_z(n, d, StdGaussian(), 100_000, 3001, threads=THREADS)
    target = 1.0 + d / (n - d - 2)
    gauss_ok = abs(est.mean - target) <= 3.0 * est.stderr
    mix = diag_inv_z(n, d, TrimodalMix(0.3, 1.0), 100_000, 3002, threads=THREADS)
    bound = (n - 2 + math.sqrt(d)) / (n - d - 2)
    mix_ok = mix.mean <= bound + 3.0 * mix.stderr
    report(
        4, "inv-z-moments", gauss_ok and mix_ok,
        f"gaussian {est.mean:.5f} vs {target:.5f} (3se {3 * est.stderr:.1e}); "
        f"mixture {mix.mean:.5f} <= {bound:.5f}",
        time.time() - t0, 60.0,
    )


def test_criterion_05_conditional_append_bounds():
    t0 = time.time()
    rng = np.random.default_rng(1005)
    n = 20
    sigma = 0.3
    mix_law = TrimodalMix(sigma, 1.0)
    draws = 100_000
    checked = 0
    ok = True
    detail = []
    for d, count in ((5, 7), (10, 7), (15, 6)):
        for _ in range(count):
            a = rng.standard_normal((n, d))
            x = rng.standard_normal(d)
            v = np.linalg.pinv(a).T @ x
            vv = float(v @ v)
            est_g = conditional_stacked_mean(a, x, StdGaussian(), draws, 4000 + checked, threads=THREADS)
            bound_g = ((n - 2) * vv + 1.0) / (n - d - 2)
            est_m = conditional_stacked_mean(a, x, mix_law, draws, 5000 + checked, threads=THREADS)
            bound_m = ((n - 2 + math.sqrt(d)) * vv + 2.0 / (3.0 * sigma**2) + 1.0) / (n - d - 2)
            if not est_g.mean <= bound_g + 3.0 * est_g.stderr:
                ok = False
                detail.append(f"gaussian bound broken at d={d}")
            if not est_m.mean <= bound_m + 3.0 * est_m.stderr:
                ok = False
                detail.append(f"mixture bound broken at d={d}")
            checked += 1
    report(
        5, "conditional-append-bounds", ok,
        "; ".join(detail) or f"all {checked} instances inside both bounds (+3 stderr)",
        time.time() - t0, 300.0,
    )


def test_criterion_06_underparam_arbitrary_ascent():
    t0 = time.time()
    prefix = ProductLaw.uniform(StdGaussian(), 3)
    law, cert = choose_ascent_params(
        prefix, 8, 1.0, seed=1006, margin=10.0, threads=THREADS
    )
    margin = cert.delta.delta_mean - 3.0 * cert.delta.delta_stderr
    report(
        6, "underparam-arbitrary-ascent", margin > 10.0,
        f"sigma={law.sigma:g}, delta={cert.delta.delta_mean:.2f} "
        f"(-3se margin {margin:.2f} > 10)",
        time.time() - t0, 120.0,
    )


def test_criterion_07_overparam_descent_asymptotics():
    t0 = time.time()
    n, d, sigma = 6, 14, 1e-2
    law = ProductLaw.uniform(StdGaussian(), d)
    delta = estimate_delta(
        law, d, n, Gaussian(sigma), 1.0, ZeroBeta(), 600_000, 1007, threads=THREADS
    )
    certified = delta.delta_mean + 3.0 * delta.delta_stderr < 0.0
    curv, _ = estimate_overparam_norms(law, d, n, 200_000, 1017, threads=THREADS)
    ratio = delta.delta_mean / (-2.0 * sigma**2 * curv.mean)
    report(
        7, "overparam-descent-asymptotics", certified and 0.5 <= ratio <= 1.5,
        f"delta={delta.delta_mean:.3e} (t={delta.delta_mean / delta.delta_stderr:.0f}), "
        f"ratio={ratio:.3f} in [0.5, 1.5]",
        time.time() - t0, 300.0,
    )


def test_criterion_08_overparam_mixture_ascent():
    t0 = time.time()
    n, d = 6, 14
    law = ProductLaw.uniform(StdGaussian(), d)
    means = []
    all_positive = True
    for i, sigma in enumerate((0.1, 0.05, 0.02)):
        delta = estimate_delta(
            law, d, n, TrimodalMix(sigma, 1.0 / sigma**2), 1.0, ZeroBeta(),
            500_000, 1008 + i, threads=THREADS,
        )
        means.append(delta.delta_mean)
        if not delta.delta_mean - 3.0 * delta.delta_stderr > 0.0:
            all_positive = False
    increasing = means[0] < means[1] < means[2]
    report(
        8, "overparam-mixture-ascent", all_positive and increasing,
        f"deltas {means[0]:.3f} < {means[1]:.3f} < {means[2]:.3f}, each positive at 3se",
        time.time() - t0, 300.0,
    )


def test_criterion_09_full_curve_design():
    t0 = time.time()
    plan = design_curve(
        n=6, D=20, arrows=parse_arrows("duddud"), eta=1.0, beta_mode="zero",
        seed=1009, threads=THREADS,
    )
    designed_ok = all(c.verdict == "certified" for c in plan.certifications)
    rep = verify_plan(plan, trials=200_000, seed=990_009, threads=THREADS)
    sigmas = [f"{law.sigma:g}" for law in plan.laws.laws[14:]]
    report(
        9, "full-curve-design", designed_ok and rep.all_pass,
        f"6 steps certified (sigmas {', '.join(sigmas)}); fresh-seed verify "
        + ("passed" if rep.all_pass else "FAILED"),
        time.time() - t0, 1200.0,
    )


def test_criterion_10_gaussian_beta_mode():
    t0 = time.time()
    rng = np.random.default_rng(1010)
    rho = 0.7
    ok_bias = True
    for i in range(20):
        n = int(rng.integers(4, 8))
        d = int(rng.integers(n + 1, n + 12))
        a = rng.standard_normal((n, d))
        x = rng.standard_normal(d)
        state = pinv_direct(a)
        closed = rho**2 * max(float(x @ x - x @ (state.pinv @ (a @ x))), 0.0)
        w = (state.pinv @ a).T @ x - x  # (A^+ A - I)^T x
        betas = rho * rng.standard_normal((100_000, d))
        vals = (betas @ w) ** 2
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        if abs(vals.mean() - closed) > 3.0 * se:
            ok_bias = False
    plan = design_curve(
        n=6, D=16, arrows=parse_arrows("du"), eta=1.0, beta_mode="gaussian",
        seed=1011, threads=THREADS,
    )
    down = next(c for c in plan.certifications if c.arrow is Arrow.DOWN)
    up = next(c for c in plan.certifications if c.arrow is Arrow.UP)
    exp_ok = down.verdict == "certified" and up.verdict == "certified"
    report(
        10, "gaussian-beta-mode", ok_bias and exp_ok,
        f"closed-form bias matched beta sampling on 20 instances; rho={plan.rho:.4f} "
        f"certifies down ({down.delta.delta_mean:.3e}) and up ({up.delta.delta_mean:.3e})",
        time.time() - t0, 600.0,
    )


def test_criterion_11_stochastic_dominance():
    t0 = time.time()
    rep = diag_noncentral_dominance(5, 4.0, 100_000, 1011)
    report(
        11, "stochastic-dominance", rep.dominates_with_margin,
        f"min decile margin {rep.margins.min():.4f} > 0 (survival gap minus 3se)",
        time.time() - t0, 10.0,
    )


def test_criterion_12_cli_determinism(tmp_path):
    t0 = time.time()
    outs = []
    for threads, sub in ((1, "a"), (8, "b")):
        res = subprocess.run(
            [
                sys.executable, "-m", "riskcurve.cli", "design",
                "--n", "6", "--D", "16", "--arrows", "du", "--seed", "7",
                "--trials", "20000", "--threads", str(threads),
                "--out", str(tmp_path / sub),
            ],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0, res.stderr
        outs.append(tmp_path / sub)
    same_plan = (outs[0] / "plan.toml").read_bytes() == (outs[1] / "plan.toml").read_bytes()
    same_csv = (outs[0] / "curve.csv").read_bytes() == (outs[1] / "curve.csv").read_bytes()
    report(
        12, "cli-determinism", same_plan and same_csv,
        "plan and curve bytes identical on 1 vs 8 threads",
        time.time() - t0, 300.0,
    )
