"""Monte Carlo estimation of the excess risk of minimum-norm regression.

The per-draw excess loss at d revealed features is

    (x^T (A^+ A - I) beta)^2  +  eta^2 |(A^T)^+ x|^2

with the label-noise expectation already taken analytically (the noise is
never sampled on the main path).  The first summand is the bias, the second
the variance.  With beta = 0 and eta = 1 the loss reduces to |(A^T)^+ x|^2.

Paired differences between d and d+1 features are evaluated with common
random numbers: each trial draws one (A, x), appends one (b, a1) from the
candidate law, and differences the two losses on the same draw.  Trials are
partitioned into fixed-size chunks; chunk c consumes a counter-based stream
keyed by (seed, c), so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.stats import trim_mean

from .laws import FeatureLaw, ProductLaw, sample_array, sample_block
from .pinv import PinvState, Z_THRESHOLD

__all__ = [
    "ZeroBeta",
    "FixedBeta",
    "GaussianBeta",
    "BetaSpec",
    "RegressionInstance",
    "RiskEstimate",
    "PairedDelta",
    "DominanceReport",
    "loss_sample",
    "bias_gaussian_beta",
    "estimate_Ld",
    "estimate_delta",
    "paired_loss_samples",
    "estimate_overparam_norms",
    "conditional_stacked_mean",
    "diag_inv_z",
    "diag_noncentral_dominance",
    "diag_ascent_lower_bound",
    "ascent_lower_bound",
    "derive_seed",
]

CHUNK = 4096
# Fraction of trials that may be redrawn before the run fails loudly.
MAX_RESAMPLE_RATE = 1e-3
_RESAMPLE_ROUNDS = 60
_TRIM = 0.005  # per-tail fraction for the 1%-trimmed diagnostic mean


# ---------------------------------------------------------------------------
# beta specifications and scalar operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroBeta:
    """True model is zero; only the variance term remains."""


@dataclass(frozen=True)
class FixedBeta:
    """Deterministic true model; ``vector`` holds all revealed coefficients.

    Estimators slice the prefix they need, so the vector must be at least as
    long as the largest dimension evaluated.
    """

    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float))
        if self.vector.ndim != 1:
            raise ValueError("beta vector must be one-dimensional")


@dataclass(frozen=True)
class GaussianBeta:
    """beta ~ N(0, rho^2 I); the bias is averaged over beta in closed form."""

    rho: float

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be a positive finite real, got {self.rho}")


BetaSpec = Union[ZeroBeta, FixedBeta, GaussianBeta]


@dataclass(frozen=True)
class RegressionInstance:
    """One fixed draw of the regression problem at d revealed features."""

    matrix: np.ndarray  # n x d design
    x: np.ndarray  # test point, length d
    eta: float
    beta: BetaSpec

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.x.shape != (self.matrix.shape[1],):
            raise ValueError(
                f"x has length {self.x.shape}, design has d={self.matrix.shape[1]}"
            )
        if not self.eta >= 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")


def loss_sample(inst: RegressionInstance, state: PinvState) -> float:
    """Excess loss of one draw: bias term plus eta^2 |(A^T)^+ x|^2.

    ``state`` must hold the pseudoinverse of ``inst.matrix``.  The Gaussian
    beta average is a separate operation (:func:`bias_gaussian_beta`).
    """
    if state.matrix.shape != inst.matrix.shape or not np.array_equal(
        state.matrix, inst.matrix
    ):
        raise ValueError("pinv state does not match the instance's design matrix")
    v = state.pinv.T @ inst.x
    variance = inst.eta**2 * float(v @ v)
    if isinstance(inst.beta, ZeroBeta):
        return variance
    if isinstance(inst.beta, FixedBeta):
        beta = inst.beta.vector[: state.d]
        if inst.beta.vector.shape[0] < state.d:
            raise ValueError("beta vector shorter than the revealed dimension")
        resid = state.pinv @ (state.matrix @ beta) - beta
        return float(inst.x @ resid) ** 2 + variance
    raise ValueError("loss_sample handles Zero/Fixed beta; use bias_gaussian_beta")


def bias_gaussian_beta(state: PinvState, x: np.ndarray, rho: float) -> float:
    """Closed-form beta average of the bias: rho^2 x^T (I - A^+ A) x.

    Zero in the underparametrized full-column-rank case.
    """
    x = np.asarray(x, dtype=float)
    proj = state.pinv @ (state.matrix @ x)
    return max(rho**2 * float(x @ x - x @ proj), 0.0)


# ---------------------------------------------------------------------------
# estimate containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo mean with its standard error and provenance."""

    mean: float
    stderr: float
    trials: int
    seed: int
    regime: str
    resample_rate: float = 0.0
    trimmed_mean: float = math.nan


@dataclass(frozen=True)
class PairedDelta:
    """Common-random-number estimate of L_{d+1} - L_d from one feature append."""

    delta_mean: float
    delta_stderr: float
    trials: int
    seed: int
    d_from: int
    resample_rate: float = 0.0
    trimmed_mean: float = math.nan
    mean_from: float = math.nan
    mean_to: float = math.nan


@dataclass(frozen=True)
class DominanceReport:
    """Empirical survival comparison of two nonnegative samples on a grid."""

    grid: np.ndarray
    survival_noncentral: np.ndarray
    survival_central: np.ndarray
    margins: np.ndarray  # (S_x - S_y) - 3 * binomial stderr of the difference
    dominates_with_margin: bool
    ge_within_tol: bool
    trials: int
    seed: int


# ---------------------------------------------------------------------------
# deterministic streams
# ---------------------------------------------------------------------------


def derive_seed(seed: int, *parts) -> int:
    """Stable child seed from a base seed and a path of labels.

    Integer parts are used as-is; strings are folded through crc32.  Built on
    numpy's SeedSequence so unrelated paths give statistically independent
    streams.
    """
    key = []
    for p in parts:
        if isinstance(p, str):
            key.append(zlib.crc32(p.encode("utf-8")))
        else:
            key.append(int(p) & 0xFFFFFFFF)
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(key))
    # masked to the signed-64 range so derived seeds survive TOML plan files
    return int(ss.generate_state(1, np.uint64)[0]) & 0x7FFFFFFFFFFFFFFF


def _chunk_stream(seed: int, index: int) -> np.random.Generator:
    key = np.array([int(seed) & (2**64 - 1), index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _run_chunks(
    trials: int,
    seed: int,
    make_values: Callable[[np.random.Generator, int], tuple],
    width: int,
    threads: int = 1,
) -> tuple[np.ndarray, float]:
    """Fill a (trials, width) value table chunk by chunk.

    The chunk partition is fixed (size ``CHUNK``), each chunk has its own
    counter-based stream, and chunks write disjoint slices, so the result is
    independent of the worker count.
    """
    n_chunks = -(-trials // CHUNK)
    out = np.empty((trials, width))
    resampled = np.zeros(n_chunks, dtype=np.int64)

    def work(ci: int) -> None:
        lo = ci * CHUNK
        hi = min(trials, lo + CHUNK)
        rng = _chunk_stream(seed, ci)
        vals, res = make_values(rng, hi - lo)
        out[lo:hi] = vals
        resampled[ci] = res

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(n_chunks)))
    else:
        for ci in range(n_chunks):
            work(ci)
    rate = float(resampled.sum()) / trials
    if rate >= MAX_RESAMPLE_RATE:
        raise RuntimeError(
            f"resample rate {rate:.2%} exceeds {MAX_RESAMPLE_RATE:.2%}: "
            "the law produces too many numerically singular draws"
        )
    return out, rate


def _solve_batch(gram: np.ndarray, rhs: np.ndarray):
    """Batched linear solve that survives singular members.

    Returns (solution, ok_mask); failed members get zeros and ok=False.
    """
    try:
        return np.linalg.solve(gram, rhs), np.ones(gram.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        sol = np.zeros_like(rhs)
        ok = np.ones(gram.shape[0], dtype=bool)
        for i in range(gram.shape[0]):
            try:
                sol[i] = np.linalg.solve(gram[i], rhs[i])
            except np.linalg.LinAlgError:
                ok[i] = False
        return sol, ok


def _resample_loop(rng, count, draw, compute):
    """Draw a chunk, then redraw just the rejected trials until all pass."""
    data = draw(rng, count)
    values, ok = compute(*data)
    resampled = 0
    rounds = 0
    while not ok.all():
        bad = ~ok
        k = int(bad.sum())
        resampled += k
        rounds += 1
        if rounds > _RESAMPLE_ROUNDS:
            raise RuntimeError("resampling did not converge; law is degenerate")
        fresh = draw(rng, k)
        fresh_vals, fresh_ok = compute(*fresh)
        idx = np.flatnonzero(bad)
        values[idx] = fresh_vals
        ok[idx] = fresh_ok
    return values, resampled


# ---------------------------------------------------------------------------
# batched loss kernels
# ---------------------------------------------------------------------------


def _bias_over(a, x, ax, v, beta: BetaSpec, solve_extra):
    """Per-trial bias term in the over regime (a: (t,n,d), x: (t,d))."""
    if isinstance(beta, ZeroBeta):
        return 0.0, None
    if isinstance(beta, GaussianBeta):
        # rho^2 * x^T (I - A^+ A) x, with x^T A^+ A x = (Ax)^T G (Ax)
        quad = np.einsum("tn,tn->t", ax, v)
        xx = np.einsum("td,td->t", x, x)
        return beta.rho**2 * np.maximum(xx - quad, 0.0), None
    # fixed beta: (x^T A^+ A beta - x^T beta)^2 with A^+ A beta = A^T G A beta
    d = x.shape[1]
    if beta.vector.shape[0] < d:
        raise ValueError("beta vector shorter than the revealed dimension")
    bvec = beta.vector[:d]
    abeta = np.einsum("tnd,d->tn", a, bvec)
    gabeta = solve_extra(abeta)
    quad = np.einsum("tn,tn->t", ax, gabeta)
    xbeta = x @ bvec
    return (quad - xbeta) ** 2, gabeta


def _under_kernel(a, x, b, a1, eta, with_append):
    """Loss (and appended loss) for d < n via the projection-based update."""
    t, n, d = a.shape
    gram = np.einsum("tnd,tne->tde", a, a)
    rhs = [x]
    if with_append:
        rhs.append(np.einsum("tnd,tn->td", a, b))
    sol, ok = _solve_batch(gram, np.stack(rhs, axis=-1))
    v = np.einsum("tnd,td->tn", a, sol[..., 0])
    loss0 = eta**2 * np.einsum("tn,tn->t", v, v)
    if not with_append:
        return loss0[:, None], ok
    pb = np.einsum("tnd,td->tn", a, sol[..., 1])
    bb = np.einsum("tn,tn->t", b, b)
    bpb = np.einsum("tn,tn->t", b, pb)
    denom = bb - bpb
    with np.errstate(divide="ignore", invalid="ignore"):
        z = denom / bb
        ok = ok & (bb > 0.0) & (z >= Z_THRESHOLD)
        zs = np.where(ok, z, 1.0)
        bbs = np.where(bb > 0.0, bb, 1.0)
        dens = np.where(ok, denom, 1.0)
        bv = np.einsum("tn,tn->t", b, v)
        t1 = v + pb * (bv / (zs * bbs))[:, None]
        y = t1 - b * (np.einsum("tn,tn->t", b, t1) / bbs)[:, None]
        y = y + (b - pb) * (a1 / dens)[:, None]
    loss1 = eta**2 * np.einsum("tn,tn->t", y, y)
    return np.stack([loss0, loss1], axis=-1), ok


def _over_kernel(a, x, b, a1, eta, beta: BetaSpec, with_append, extra_norms=False):
    """Loss (and appended loss) for d >= n via the Gram-inverse update."""
    t, n, d = a.shape
    gram = np.einsum("tnd,tmd->tnm", a, a)
    ax = np.einsum("tnd,td->tn", a, x)
    rhs = [ax]
    if with_append:
        rhs.append(b)
    sol, ok = _solve_batch(gram, np.stack(rhs, axis=-1))
    v = sol[..., 0]

    def solve_extra(vecs):
        extra, ok2 = _solve_batch(gram, vecs[..., None])
        return extra[..., 0]

    bias0, gabeta = _bias_over(a, x, ax, v, beta, solve_extra)
    loss0 = eta**2 * np.einsum("tn,tn->t", v, v) + bias0
    cols = [loss0]
    if extra_norms:
        gv = solve_extra(v)
        cols.append(np.einsum("tn,tn->t", v, gv))  # |(A^T A)^+ x|^2
    if with_append:
        gb = sol[..., 1]
        r = 1.0 + np.einsum("tn,tn->t", b, gb)
        bv = np.einsum("tn,tn->t", b, v)
        y = v - gb * ((bv - a1) / r)[:, None]
        loss1 = eta**2 * np.einsum("tn,tn->t", y, y)
        if isinstance(beta, GaussianBeta):
            q = v + gb * a1[:, None]  # G (A x + b a1)
            gq = q - gb * (np.einsum("tn,tn->t", b, q) / r)[:, None]
            t0p = ax + b * a1[:, None]
            quad = np.einsum("tn,tn->t", t0p, gq)
            xx = np.einsum("td,td->t", x, x) + a1**2
            loss1 = loss1 + beta.rho**2 * np.maximum(xx - quad, 0.0)
        elif isinstance(beta, FixedBeta):
            if beta.vector.shape[0] < d + 1:
                raise ValueError("beta vector shorter than d+1")
            b1 = float(beta.vector[d])
            gm = gabeta + gb * b1  # G (A beta + b beta_1), then downdated to G'
            gm = gm - gb * (np.einsum("tn,tn->t", b, gm) / r)[:, None]
            t0p = ax + b * a1[:, None]
            quad = np.einsum("tn,tn->t", t0p, gm)
            xbeta = x @ beta.vector[:d] + a1 * b1
            loss1 = loss1 + (quad - xbeta) ** 2
        cols.append(loss1)
    return np.stack(cols, axis=-1), ok


# ---------------------------------------------------------------------------
# public estimators
# ---------------------------------------------------------------------------


def _check_common(law: ProductLaw, d: int, n: int, trials: int):
    if trials < 2:
        raise ValueError("trials must be at least 2 (stderr is undefined for 1)")
    if not 1 <= d <= len(law):
        raise ValueError(f"d={d} outside [1, {len(law)}]")
    if d == n:
        raise ValueError("d = n sits on the interpolation threshold; not estimable")
    if n < 1:
        raise ValueError("n must be positive")


def _reduce(values: np.ndarray, trials: int, seed: int, regime: str, rate: float):
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(trials))
    return RiskEstimate(
        mean=mean,
        stderr=stderr,
        trials=trials,
        seed=seed,
        regime=regime,
        resample_rate=rate,
        trimmed_mean=float(trim_mean(values, _TRIM)),
    )


def estimate_Ld(
    law: ProductLaw,
    d: int,
    n: int,
    eta: float,
    beta: BetaSpec,
    trials: int,
    seed: int,
    threads: int = 1,
) -> RiskEstimate:
    """Monte Carlo estimate of the excess risk at d revealed features.

    Each trial draws a fresh (A, x) from the d-prefix of ``law``.  Runs in
    the regime implied by d versus n; d = n is refused.
    """
    _check_common(law, d, n, trials)
    regime = "under" if d < n else "over"

    def draw(rng, count):
        a = sample_block(law, d, rng, (count, n))
        x = sample_block(law, d, rng, (count,))
        return a, x

    def make_values(rng, count):
        if regime == "under":
            compute = lambda a, x: _under_kernel(a, x, None, None, eta, False)
        else:
            compute = lambda a, x: _over_kernel(a, x, None, None, eta, beta, False)
        return _resample_loop(rng, count, draw, compute)

    values, rate = _run_chunks(trials, seed, make_values, 1, threads)
    return _reduce(values[:, 0], trials, seed, regime, rate)


def paired_loss_samples(
    law: ProductLaw,
    d: int,
    n: int,
    new_law: FeatureLaw,
    eta: float,
    beta: BetaSpec,
    trials: int,
    seed: int,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-trial losses (at d and at d+1) on common draws.

    Returns (loss_d, loss_d1, resample_rate); both loss arrays come from the
    same (A, x, b, a1) draws, which is what makes the paired difference
    low-variance and the pathwise comparisons meaningful.
    """
    _check_common(law, d, n, trials)
    regime = "under" if d < n else "over"

    def draw(rng, count):
        a = sample_block(law, d, rng, (count, n))
        x = sample_block(law, d, rng, (count,))
        b = sample_array(new_law, rng, (count, n))
        a1 = sample_array(new_law, rng, (count,))
        return a, x, b, a1

    def make_values(rng, count):
        if regime == "under":
            compute = lambda a, x, b, a1: _under_kernel(a, x, b, a1, eta, True)
        else:
            compute = lambda a, x, b, a1: _over_kernel(a, x, b, a1, eta, beta, True)
        return _resample_loop(rng, count, draw, compute)

    values, rate = _run_chunks(trials, seed, make_values, 2, threads)
    return values[:, 0], values[:, 1], rate


def estimate_delta(
    law: ProductLaw,
    d: int,
    n: int,
    new_law: FeatureLaw,
    eta: float,
    beta: BetaSpec,
    trials: int,
    seed: int,
    threads: int = 1,
) -> PairedDelta:
    """Paired estimate of L_{d+1} - L_d when the next feature follows ``new_law``."""
    loss0, loss1, rate = paired_loss_samples(
        law, d, n, new_law, eta, beta, trials, seed, threads
    )
    diff = loss1 - loss0
    return PairedDelta(
        delta_mean=float(diff.mean()),
        delta_stderr=float(diff.std(ddof=1) / math.sqrt(trials)),
        trials=trials,
        seed=seed,
        d_from=d,
        resample_rate=rate,
        trimmed_mean=float(trim_mean(diff, _TRIM)),
        mean_from=float(loss0.mean()),
        mean_to=float(loss1.mean()),
    )


def estimate_overparam_norms(
    law: ProductLaw,
    d: int,
    n: int,
    trials: int,
    seed: int,
    threads: int = 1,
) -> tuple[RiskEstimate, RiskEstimate]:
    """Joint estimates of |(A^T A)^+ x|^2 and |(A^T)^+ x|^2 on common draws.

    The first drives the small-sigma descent rate (and the rho numerator),
    the second is the plain variance term (the rho denominator).
    """
    _check_common(law, d, n, trials)
    if d < n:
        raise ValueError("overparametrized norms need d > n")

    def draw(rng, count):
        a = sample_block(law, d, rng, (count, n))
        x = sample_block(law, d, rng, (count,))
        return a, x

    def make_values(rng, count):
        compute = lambda a, x: _over_kernel(
            a, x, None, None, 1.0, ZeroBeta(), False, extra_norms=True
        )
        return _resample_loop(rng, count, draw, compute)

    values, rate = _run_chunks(trials, seed, make_values, 2, threads)
    curvature = _reduce(values[:, 1], trials, seed, "over", rate)
    variance = _reduce(values[:, 0], trials, seed, "over", rate)
    return curvature, variance


def conditional_stacked_mean(
    matrix: np.ndarray,
    x: np.ndarray,
    new_law: FeatureLaw,
    trials: int,
    seed: int,
    threads: int = 1,
) -> RiskEstimate:
    """Mean appended loss conditioned on a fixed (A, x), underparametrized.

    Averages |[A^T; b^T]^+ [x; a1]|^2 over (b, a1) ~ ``new_law`` only; this
    is the conditional expectation the appended-feature upper bounds speak
    about, as opposed to the unconditional estimators above.
    """
    a = np.asarray(matrix, dtype=float)
    x = np.asarray(x, dtype=float)
    n, d = a.shape
    if d + 1 > n:
        raise ValueError("conditional append bound applies to d + 1 <= n")
    pinv = np.linalg.pinv(a)
    v = pinv.T @ x
    p = a @ pinv

    def draw(rng, count):
        b = sample_array(new_law, rng, (count, n))
        a1 = sample_array(new_law, rng, (count,))
        return b, a1

    def compute(b, a1):
        pb = b @ p.T
        bb = np.einsum("tn,tn->t", b, b)
        bpb = np.einsum("tn,tn->t", b, pb)
        denom = bb - bpb
        with np.errstate(divide="ignore", invalid="ignore"):
            z = denom / bb
            ok = (bb > 0.0) & (z >= Z_THRESHOLD)
            zs = np.where(ok, z, 1.0)
            bbs = np.where(bb > 0.0, bb, 1.0)
            dens = np.where(ok, denom, 1.0)
            bv = b @ v
            t1 = v[None, :] + pb * (bv / (zs * bbs))[:, None]
            y = t1 - b * (np.einsum("tn,tn->t", b, t1) / bbs)[:, None]
            y = y + (b - pb) * (a1 / dens)[:, None]
        vals = np.einsum("tn,tn->t", y, y)
        return vals[:, None], ok

    def make_values(rng, count):
        return _resample_loop(rng, count, draw, compute)

    values, rate = _run_chunks(trials, seed, make_values, 1, threads)
    return _reduce(values[:, 0], trials, seed, "under", rate)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def diag_inv_z(
    n: int,
    d: int,
    law_for_b: FeatureLaw,
    trials: int,
    seed: int,
    threads: int = 1,
) -> RiskEstimate:
    """Monte Carlo mean of 1/z with a standard-Gaussian d-column design.

    For Gaussian b the exact value is 1 + d/(n-d-2); mixture draws stay
    below (n-2+sqrt(d))/(n-d-2).  d = 0 is the no-projection edge (z = 1).
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    if d < 0 or (d > 0 and d + 2 >= n):
        raise ValueError("diag_inv_z needs d + 2 < n (or d = 0)")

    if d == 0:
        values = np.ones(trials)
        return _reduce(values, trials, seed, "under", 0.0)

    def draw(rng, count):
        a = rng.standard_normal((count, n, d))
        b = sample_array(law_for_b, rng, (count, n))
        return a, b

    def compute(a, b):
        gram = np.einsum("tnd,tne->tde", a, a)
        atb = np.einsum("tnd,tn->td", a, b)
        sol, ok = _solve_batch(gram, atb[..., None])
        pb = np.einsum("tnd,td->tn", a, sol[..., 0])
        bb = np.einsum("tn,tn->t", b, b)
        bpb = np.einsum("tn,tn->t", b, pb)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (bb - bpb) / bb
            ok = ok & (bb > 0.0) & (z >= Z_THRESHOLD)
            vals = np.where(ok, 1.0 / np.where(ok, z, 1.0), 0.0)
        return vals[:, None], ok

    def make_values(rng, count):
        return _resample_loop(rng, count, draw, compute)

    values, rate = _run_chunks(trials, seed, make_values, 1, threads)
    return _reduce(values[:, 0], trials, seed, "under", rate)


def diag_noncentral_dominance(
    k: int, lam: float, trials: int, seed: int
) -> DominanceReport:
    """Empirical check that the noncentral chi-square survival dominates.

    Draws chi^2(k, lam) and chi^2(k) samples, compares survival fractions on
    the central sample's deciles, and reports the margin left after
    subtracting three binomial standard errors of the difference.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    rng = _chunk_stream(seed, 0)
    shift = np.zeros(k)
    shift[0] = math.sqrt(lam)
    x = ((rng.standard_normal((trials, k)) + shift) ** 2).sum(axis=1)
    y = (rng.standard_normal((trials, k)) ** 2).sum(axis=1)
    grid = np.quantile(y, np.arange(0.1, 0.95, 0.1))
    sx = np.array([(x >= c).mean() for c in grid])
    sy = np.array([(y >= c).mean() for c in grid])
    se = np.sqrt(sx * (1 - sx) / trials + sy * (1 - sy) / trials)
    margins = (sx - sy) - 3.0 * se
    return DominanceReport(
        grid=grid,
        survival_noncentral=sx,
        survival_central=sy,
        margins=margins,
        dominates_with_margin=bool((margins > 0).all()),
        ge_within_tol=bool((sx - sy + 3.0 * se >= 0).all()),
        trials=trials,
        seed=seed,
    )


def ascent_lower_bound(n: int, sigma: float) -> float:
    """Analytic floor for E[a1^2 / sum b_i^2] under the mixture with mu = 1."""
    return 1.0 / (5.0 ** (n + 1) * n * sigma**2)


def diag_ascent_lower_bound(
    n: int, sigma: float, trials: int, seed: int, threads: int = 1
) -> RiskEstimate:
    """Monte Carlo mean of a1^2 / sum_i b_i^2 with mixture(sigma, mu=1) draws.

    The mean blows up like 1/sigma^2 as sigma shrinks; compare against
    :func:`ascent_lower_bound`.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    from .laws import TrimodalMix

    law = TrimodalMix(sigma=sigma, mu=1.0)

    def draw(rng, count):
        b = sample_array(law, rng, (count, n))
        a1 = sample_array(law, rng, (count,))
        return b, a1

    def compute(b, a1):
        ss = np.einsum("tn,tn->t", b, b)
        ok = ss > 0.0
        vals = np.where(ok, a1**2 / np.where(ok, ss, 1.0), 0.0)
        return vals[:, None], ok

    def make_values(rng, count):
        return _resample_loop(rng, count, draw, compute)

    values, rate = _run_chunks(trials, seed, make_values, 1, threads)
    return _reduce(values[:, 0], trials, seed, "under", rate)
