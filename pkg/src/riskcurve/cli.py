"""Command-line front end: design, verify, estimate and selftest.

Every command is a deterministic function of its effective configuration,
which is resolved as flags > config file > defaults and echoed as comment
lines into each output file.  CSV values are written with 17 significant
digits so downstream tools can reproduce them bit for bit.

Exit codes: 0 success, 1 config or parse error, 2 search budget exhausted,
3 verification failure, 4 selftest failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import designer, planfile, risk
from .laws import Gaussian, ProductLaw, StdGaussian, TrimodalMix
from .pinv import m_matrix_spectrum, pinv_direct, projection_quantities
from .risk import GaussianBeta, ZeroBeta, derive_seed

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BUDGET = 2
EXIT_VERIFY = 3
EXIT_SELFTEST = 4

DEFAULT_SEED = 20240  # fixed default so bare runs reproduce
THREADS_ENV = "RISKCURVE_THREADS"

_DEFAULTS = {
    "n": None,
    "D": None,
    "arrows": None,
    "eta": 1.0,
    "beta_mode": "zero",
    "rho": None,
    "trials": 100_000,
    "budget": designer.DEFAULT_BUDGET,
    "seed": DEFAULT_SEED,
    "threads": None,  # resolved from env, then 1
    "out": "riskcurve-out",
    "plan": None,
    "law": None,
    "d_from": None,
    "d_to": None,
}


class ConfigError(ValueError):
    pass


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _load_config_file(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file does not parse: {exc}") from exc
    unknown = set(data) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _resolve(args: argparse.Namespace) -> dict:
    """flags > config file > defaults, with env only for the thread default."""
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for key in _DEFAULTS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            cfg[key] = flag_val
    if cfg["threads"] is None:
        env = os.environ.get(THREADS_ENV)
        cfg["threads"] = int(env) if env else 1
    cfg["command"] = args.command
    return cfg


# resource/placement knobs that cannot change results; left out of the echoed
# config so outputs stay byte-identical across worker counts and directories
_NON_RESULT_KEYS = {"threads", "out"}


def _config_lines(cfg: dict) -> list[str]:
    keys = [k for k in sorted(cfg) if cfg[k] is not None and k not in _NON_RESULT_KEYS]
    return [f"# {k}={cfg[k]}" for k in keys]


def _write_curve_csv(path, cfg, rows):
    """rows: iterable of (d, RiskEstimate)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _config_lines(cfg):
            fh.write(line + "\n")
        fh.write("d,mean,stderr,trials,seed,resample_rate\n")
        for d, est in rows:
            if est is None:
                fh.write(f"# d={d} skipped: interpolation threshold (d = n)\n")
                continue
            fh.write(
                f"{d},{_fmt(est.mean)},{_fmt(est.stderr)},{est.trials},"
                f"{est.seed},{_fmt(est.resample_rate)}\n"
            )


def _parse_law(text: str):
    """Inline law syntax: std_gaussian | gaussian:SIGMA | trimodal:SIGMA,MU."""
    name, _, params = text.partition(":")
    try:
        if name == "std_gaussian":
            return StdGaussian()
        if name == "gaussian":
            return Gaussian(sigma=float(params))
        if name == "trimodal":
            sigma, mu = params.split(",")
            return TrimodalMix(sigma=float(sigma), mu=float(mu))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad law parameters in {text!r}: {exc}") from exc
    raise ConfigError(f"unknown law {name!r}; use std_gaussian, gaussian:S or trimodal:S,M")


def _require(cfg, *keys):
    for key in keys:
        if cfg.get(key) is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required for {cfg['command']}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_design(cfg: dict) -> int:
    _require(cfg, "n", "D", "arrows")
    arrows = designer.parse_arrows(cfg["arrows"])
    n, big_d = cfg["n"], cfg["D"]
    expected = big_d - (n + designer.BASE_BLOCK_EXTRA)
    if len(arrows) != expected:
        raise ConfigError(
            f"arrows must have length D-(n+{designer.BASE_BLOCK_EXTRA}) = {expected}, "
            f"got {len(arrows)}"
        )
    plan = designer.design_curve(
        n=n,
        D=big_d,
        arrows=arrows,
        eta=cfg["eta"],
        beta_mode=cfg["beta_mode"],
        seed=cfg["seed"],
        budget=cfg["budget"],
        threads=cfg["threads"],
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    planfile.save_plan(plan, out / "plan.toml", header_lines=_config_lines(cfg))

    beta = plan.beta_spec()
    rows = []
    for d in range(n + designer.BASE_BLOCK_EXTRA, big_d + 1):
        est = risk.estimate_Ld(
            plan.laws, d, n, plan.eta, beta, cfg["trials"],
            derive_seed(cfg["seed"], "curve", d), threads=cfg["threads"],
        )
        rows.append((d, est))
    _write_curve_csv(out / "curve.csv", cfg, rows)
    from .plots import render_curve_figure

    render_curve_figure(
        [r[0] for r in rows],
        [r[1].mean for r in rows],
        [r[1].stderr for r in rows],
        n,
        out / "curve.png",
        title=f"designed curve, n={n}, arrows={cfg['arrows']}",
    )
    all_ok = all(c.verdict == "certified" for c in plan.certifications)
    for cert in plan.certifications:
        print(
            f"step d={cert.d_from}->{cert.d_from + 1} {cert.arrow.value:<4} "
            f"delta={cert.delta.delta_mean:.6g} (stderr {cert.delta.delta_stderr:.3g}) "
            f"{cert.verdict}"
        )
    print(f"plan written to {out / 'plan.toml'}; curve to {out / 'curve.csv'}")
    return EXIT_OK if all_ok else EXIT_VERIFY


def cmd_verify(cfg: dict) -> int:
    _require(cfg, "plan")
    plan = planfile.load_plan(cfg["plan"])
    report = designer.verify_plan(
        plan, cfg["trials"], cfg["seed"], threads=cfg["threads"]
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verify.csv", "w", encoding="utf-8", newline="\n") as fh:
        for line in _config_lines(cfg):
            fh.write(line + "\n")
        fh.write("d,arrow,delta_mean,delta_stderr,trials,seed,verdict\n")
        for step in report.steps:
            fh.write(
                f"{step.d_from},{step.arrow.value},{_fmt(step.delta.delta_mean)},"
                f"{_fmt(step.delta.delta_stderr)},{step.delta.trials},"
                f"{step.delta.seed},{step.verdict}\n"
            )
    for step in report.steps:
        print(
            f"step d={step.d_from}->{step.d_from + 1} expected {step.arrow.value:<4} "
            f"delta={step.delta.delta_mean:.6g} (stderr {step.delta.delta_stderr:.3g}) "
            f"{step.verdict}"
        )
    if report.all_pass:
        print("all steps re-certified")
        return EXIT_OK
    print(f"verification failed; consider --trials {report.suggested_trials}")
    return EXIT_VERIFY


def cmd_estimate(cfg: dict) -> int:
    if cfg["plan"] is not None:
        plan = planfile.load_plan(cfg["plan"])
        laws, n, eta, beta = plan.laws, plan.n, plan.eta, plan.beta_spec()
        big_d = plan.D
    else:
        _require(cfg, "law", "n", "D")
        n, big_d = cfg["n"], cfg["D"]
        eta = cfg["eta"]
        laws = ProductLaw.uniform(_parse_law(cfg["law"]), big_d)
        beta = ZeroBeta() if cfg["beta_mode"] == "zero" else GaussianBeta(cfg["rho"] or 1.0)
    d_from = cfg["d_from"] if cfg["d_from"] is not None else 1
    d_to = cfg["d_to"] if cfg["d_to"] is not None else big_d
    ds = [d for d in range(d_from, d_to + 1) if 1 <= d <= big_d]
    if not ds:
        raise ConfigError(f"empty dimension range {d_from}..{d_to}")
    rows = []
    for d in ds:
        if d == n:
            rows.append((d, None))
            continue
        est = risk.estimate_Ld(
            laws, d, n, eta, beta, cfg["trials"],
            derive_seed(cfg["seed"], "estimate", d), threads=cfg["threads"],
        )
        rows.append((d, est))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_curve_csv(out / "curve.csv", cfg, rows)
    kept = [(d, e) for d, e in rows if e is not None]
    from .plots import render_curve_figure

    render_curve_figure(
        [d for d, _ in kept],
        [e.mean for _, e in kept],
        [e.stderr for _, e in kept],
        n,
        out / "curve.png",
    )
    for d, est in rows:
        if est is None:
            print(f"d={d}: skipped (interpolation threshold)")
        else:
            print(f"d={d}: {est.mean:.6g} +- {est.stderr:.3g}")
    return EXIT_OK


def _selftest_checks(cfg: dict):
    """Yield (name, identity, margin_text, passed) for each diagnostic."""
    seed = cfg["seed"]
    threads = cfg["threads"]
    rng = np.random.default_rng(derive_seed(seed, "selftest"))

    # pseudoinverse append updates against the direct factorization
    for label, under in (("append-under-oracle", True), ("append-over-oracle", False)):
        from .pinv import stack_row_pinv_over, stack_row_pinv_under

        worst = 0.0
        for _ in range(300):
            if under:
                n = int(rng.integers(5, 31))
                d = int(rng.integers(1, n - 1))
            else:
                n = int(rng.integers(4, 13))
                d = int(rng.integers(n, n + 41))
            a = rng.standard_normal((n, d))
            b = rng.standard_normal(n)
            state = pinv_direct(a)
            new = stack_row_pinv_under(state, b) if under else stack_row_pinv_over(state, b)
            direct = pinv_direct(np.hstack([a, b[:, None]]))
            err = np.linalg.norm(new.pinv - direct.pinv) / np.linalg.norm(direct.pinv)
            worst = max(worst, err)
        yield (
            label,
            "update == direct pseudoinverse",
            f"max rel err {worst:.2e} (tol 1e-9)",
            worst <= 1e-9,
        )

    # spectrum of the append quadratic form: {1 - 1/z, 1}, trace 2 - 1/z
    worst = 0.0
    for _ in range(200):
        a = rng.standard_normal((8, 3))
        b = rng.standard_normal(8)
        quant = projection_quantities(pinv_direct(a), b)
        spec = m_matrix_spectrum(quant["P"], quant["Q"], quant["z"])
        z = quant["z"]
        worst = max(
            worst,
            abs(spec.eig_low - (1 - 1 / z)),
            abs(spec.eig_high - 1.0),
            abs(spec.trace - (2 - 1 / z)),
            0.0 if spec.residual_rank == 2 else 1.0,
        )
    yield (
        "m-matrix-spectrum",
        "eigs {1-1/z, 1}, tr M == 2 - 1/z",
        f"max abs err {worst:.2e} (tol 1e-8)",
        worst <= 1e-8,
    )

    n, d = 20, 5
    est = risk.diag_inv_z(n, d, StdGaussian(), 100_000, derive_seed(seed, "invz"), threads)
    target = 1 + d / (n - d - 2)
    err = abs(est.mean - target)
    yield (
        "inv-z-gaussian",
        "E[1/z] == 1 + d/(n-d-2)",
        f"est {est.mean:.5f} target {target:.5f} |err| {err:.2e} <= 3se {3 * est.stderr:.2e}",
        err <= 3 * est.stderr,
    )

    mix = TrimodalMix(sigma=0.3, mu=1.0)
    est = risk.diag_inv_z(n, d, mix, 100_000, derive_seed(seed, "invz-mix"), threads)
    bound = (n - 2 + math.sqrt(d)) / (n - d - 2)
    yield (
        "inv-z-mixture",
        "E[1/z] <= (n-2+sqrt(d))/(n-d-2)",
        f"est {est.mean:.5f} bound {bound:.5f} + 3se {3 * est.stderr:.2e}",
        est.mean <= bound + 3 * est.stderr,
    )

    rep = risk.diag_noncentral_dominance(5, 4.0, 100_000, derive_seed(seed, "dom"))
    yield (
        "noncentral-dominance",
        "P(X >= c) > P(Y >= c) at the deciles",
        f"min margin {rep.margins.min():.4f} (needs > 0)",
        rep.dominates_with_margin,
    )

    n_asc, sig = 5, 0.1
    est = risk.diag_ascent_lower_bound(n_asc, sig, 200_000, derive_seed(seed, "asc"), threads)
    floor = risk.ascent_lower_bound(n_asc, sig)
    yield (
        "ascent-floor",
        "E[a1^2/sum b^2] >= 1/(5^(n+1) n sigma^2)",
        f"est-3se {est.mean - 3 * est.stderr:.5f} floor {floor:.5f}",
        est.mean - 3 * est.stderr >= floor,
    )

    # pathwise: appending a feature in the underparametrized regime never helps
    law = ProductLaw.uniform(StdGaussian(), 6)
    l0, l1, _ = risk.paired_loss_samples(
        law, 5, 12, StdGaussian(), 1.0, ZeroBeta(), 2000,
        derive_seed(seed, "pathwise"), threads,
    )
    viol = int((l1 - l0 < -1e-10 * (1 + l0)).sum())
    yield (
        "pathwise-monotone-under",
        "per-draw stacked loss >= current loss (d < n)",
        f"{viol} violations in 2000 draws",
        viol == 0,
    )

    if cfg.get("force_fail"):
        yield ("forced-failure", "exercises the failure exit path", "forced by flag", False)


def cmd_selftest(cfg: dict) -> int:
    failures = 0
    for name, identity, margin, passed in _selftest_checks(cfg):
        status = "PASS" if passed else "FAIL"
        print(f"{status}  {name:<24} {identity}  [{margin}]")
        failures += not passed
    if failures:
        print(f"{failures} diagnostic(s) failed")
        return EXIT_SELFTEST
    print("all diagnostics passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskcurve",
        description="design, verify and estimate risk curves for minimum-norm regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file; flags still win")
        p.add_argument("--n", type=int, help="training sample count")
        p.add_argument("--D", type=int, help="ambient dimension")
        p.add_argument("--arrows", help="per-step pattern, e.g. duddud")
        p.add_argument("--eta", type=float, help="label noise std (default 1)")
        p.add_argument("--beta-mode", dest="beta_mode", choices=["zero", "gaussian"])
        p.add_argument("--rho", type=float, help="beta scale (gaussian mode)")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per estimate")
        p.add_argument("--budget", type=int, help="max trials per certification")
        p.add_argument("--seed", type=int, help=f"base seed (default {DEFAULT_SEED})")
        p.add_argument("--threads", type=int, help=f"worker cap (default ${THREADS_ENV} or 1)")
        p.add_argument("--out", help="output directory (default riskcurve-out)")

    p_design = sub.add_parser("design", help="search laws realizing an arrow pattern")
    common(p_design)

    p_verify = sub.add_parser("verify", help="re-certify a plan with fresh seeds")
    common(p_verify)
    p_verify.add_argument("--plan", help="plan file to verify")

    p_estimate = sub.add_parser("estimate", help="estimate the risk curve over a range of d")
    common(p_estimate)
    p_estimate.add_argument("--plan", help="plan file supplying the law")
    p_estimate.add_argument("--law", help="inline law: std_gaussian | gaussian:S | trimodal:S,M")
    p_estimate.add_argument("--d-from", dest="d_from", type=int)
    p_estimate.add_argument("--d-to", dest="d_to", type=int)

    p_self = sub.add_parser("selftest", help="run the numeric diagnostic suite")
    common(p_self)
    p_self.add_argument("--force-fail", dest="force_fail", action="store_true")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.command == "selftest":
            cfg["force_fail"] = getattr(args, "force_fail", False)
        handler = {
            "design": cmd_design,
            "verify": cmd_verify,
            "estimate": cmd_estimate,
            "selftest": cmd_selftest,
        }[args.command]
        return handler(cfg)
    except designer.BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, planfile.PlanParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
