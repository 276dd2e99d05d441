"""Constructive search for feature laws that realize a prescribed risk curve.

Overparametrized appends are steerable: a small-sigma Gaussian feature lowers
the risk (the paired difference behaves like -2 sigma^2 E|(A^T A)^+ x|^2 as
sigma -> 0), while a trimodal mixture with mu = 1/sigma^2 raises it without
bound.  The designer walks sigma down a geometric grid and accepts the first
(largest) value whose paired Monte Carlo difference has the requested sign
with a three-standard-error margin.

The first n+8 coordinates are pinned to standard Gaussians so the moments
the asymptotics rely on stay finite; designed steps start at d = n+8.

These are statistical certificates, not proofs: a certified step states that
the measured difference clears 3 standard errors in the right direction, at
the recorded trial count and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .laws import FeatureLaw, Gaussian, ProductLaw, StdGaussian, TrimodalMix
from .risk import (
    BetaSpec,
    GaussianBeta,
    PairedDelta,
    ZeroBeta,
    derive_seed,
    estimate_delta,
    estimate_overparam_norms,
)

__all__ = [
    "Arrow",
    "parse_arrows",
    "arrows_to_string",
    "BudgetExhausted",
    "StepCertification",
    "CurvePlan",
    "RhoChoice",
    "VerifyStep",
    "VerifyReport",
    "BASE_BLOCK_EXTRA",
    "certify_append",
    "choose_descent_sigma",
    "choose_ascent_params",
    "choose_rho",
    "design_curve",
    "verify_plan",
]

# Designed steps start at d = n + BASE_BLOCK_EXTRA.
BASE_BLOCK_EXTRA = 8
GRID_FLOOR_EXP = 20  # sigma grid: 1, 1/2, ..., 2**-20
DEFAULT_START_TRIALS = 20_000
DEFAULT_BUDGET = 1_280_000
RHO_SAFETY = 0.5


class Arrow(Enum):
    UP = "up"
    DOWN = "down"


def parse_arrows(text: str) -> tuple[Arrow, ...]:
    """Parse a 'u'/'d' string into an arrow sequence."""
    out = []
    for ch in text:
        if ch == "u":
            out.append(Arrow.UP)
        elif ch == "d":
            out.append(Arrow.DOWN)
        else:
            raise ValueError(f"arrow characters must be 'u' or 'd', got {ch!r}")
    return tuple(out)


def arrows_to_string(arrows) -> str:
    return "".join("u" if a is Arrow.UP else "d" for a in arrows)


class BudgetExhausted(Exception):
    """No sigma on the grid certified within the trial budget."""

    def __init__(self, dimension: int, message: str = ""):
        self.dimension = dimension
        super().__init__(message or f"no grid value certified at dimension {dimension}")


@dataclass(frozen=True)
class StepCertification:
    """Outcome of certifying one append step d -> d+1."""

    d_from: int
    arrow: Arrow
    law: FeatureLaw
    delta: PairedDelta
    verdict: str  # "certified" | "inconclusive"


@dataclass(frozen=True)
class CurvePlan:
    """A designed product law together with its per-step certifications."""

    n: int
    D: int
    eta: float
    beta_mode: str  # "zero" | "gaussian"
    laws: ProductLaw
    rho: Optional[float] = None
    certifications: tuple[StepCertification, ...] = ()

    def __post_init__(self):
        if self.beta_mode not in ("zero", "gaussian"):
            raise ValueError(f"beta_mode must be 'zero' or 'gaussian', got {self.beta_mode}")
        if self.beta_mode == "gaussian" and self.rho is None:
            raise ValueError("gaussian beta mode requires rho")
        if len(self.laws) != self.D:
            raise ValueError(f"plan has {len(self.laws)} laws but D={self.D}")
        base = self.n + BASE_BLOCK_EXTRA
        if self.D < base:
            raise ValueError(f"D={self.D} smaller than the base block n+{BASE_BLOCK_EXTRA}")
        for j in range(min(base, self.D)):
            if not isinstance(self.laws.laws[j], StdGaussian):
                raise ValueError(f"law {j + 1} must be std_gaussian (base block)")
        for j in range(base, self.D):
            if not isinstance(self.laws.laws[j], (Gaussian, TrimodalMix)):
                raise ValueError(f"law {j + 1} must be gaussian or trimodal (designed)")

    @property
    def arrows(self) -> tuple[Arrow, ...]:
        """Arrows are implied by the designed law kinds: Gaussian is down, mixture is up."""
        base = self.n + BASE_BLOCK_EXTRA
        return tuple(
            Arrow.DOWN if isinstance(law, Gaussian) else Arrow.UP
            for law in self.laws.laws[base:]
        )

    def beta_spec(self) -> BetaSpec:
        if self.beta_mode == "zero":
            return ZeroBeta()
        return GaussianBeta(self.rho)


def _matches_arrow(delta: PairedDelta, arrow: Arrow, margin: float = 0.0) -> bool:
    """Certified: the mean clears three stderr on the arrow's side (plus margin up)."""
    if arrow is Arrow.UP:
        return delta.delta_mean - 3.0 * delta.delta_stderr > margin
    return delta.delta_mean + 3.0 * delta.delta_stderr < 0.0


def _conclusively_fails(delta: PairedDelta, arrow: Arrow, margin: float = 0.0) -> bool:
    """The opposite certificate: more trials at this sigma cannot help."""
    if arrow is Arrow.UP:
        return delta.delta_mean + 3.0 * delta.delta_stderr < margin
    return delta.delta_mean - 3.0 * delta.delta_stderr > 0.0


def certify_append(
    prefix: ProductLaw,
    n: int,
    new_law: FeatureLaw,
    arrow: Arrow,
    eta: float,
    beta: BetaSpec,
    seed: int,
    margin: float = 0.0,
    budget: int = DEFAULT_BUDGET,
    start_trials: int = DEFAULT_START_TRIALS,
    threads: int = 1,
) -> tuple[PairedDelta, str]:
    """Adaptive-trials certification of one append.

    Starts at ``start_trials`` and quadruples while the estimate straddles
    the decision boundary, up to ``budget`` trials.  Returns the last
    estimate and a status: "certified", "failed" (the opposite side is
    certain) or "inconclusive" (budget spent while straddling).
    """
    d = len(prefix)
    trials = min(start_trials, budget)
    attempt = 0
    while True:
        delta = estimate_delta(
            prefix,
            d,
            n,
            new_law,
            eta,
            beta,
            trials,
            derive_seed(seed, d, attempt),
            threads=threads,
        )
        if _matches_arrow(delta, arrow, margin):
            return delta, "certified"
        if _conclusively_fails(delta, arrow, margin):
            return delta, "failed"
        if trials * 4 > budget:
            return delta, "inconclusive"
        trials *= 4
        attempt += 1


def _grid_search(
    prefix: ProductLaw,
    n: int,
    arrow: Arrow,
    make_law,
    eta: float,
    beta: BetaSpec,
    seed: int,
    margin: float,
    budget: int,
    start_trials: int,
    threads: int,
    start_exp: int = 0,
) -> tuple[FeatureLaw, StepCertification]:
    """Walk sigma down 1, 1/2, 1/4, ... and return the first certified law."""
    d = len(prefix)
    for k in range(start_exp, GRID_FLOOR_EXP + 1):
        law = make_law(2.0**-k)
        delta, status = certify_append(
            prefix,
            n,
            law,
            arrow,
            eta,
            beta,
            derive_seed(seed, "grid", k),
            margin=margin,
            budget=budget,
            start_trials=start_trials,
            threads=threads,
        )
        if status == "certified":
            cert = StepCertification(d, arrow, law, delta, "certified")
            return law, cert
    raise BudgetExhausted(d)


def choose_descent_sigma(
    prefix: ProductLaw,
    n: int,
    eta: float,
    seed: int,
    beta: Optional[BetaSpec] = None,
    budget: int = DEFAULT_BUDGET,
    start_trials: int = DEFAULT_START_TRIALS,
    threads: int = 1,
    allow_below_threshold: bool = False,
    start_exp: int = 0,
) -> tuple[Gaussian, StepCertification]:
    """Largest grid sigma whose Gaussian append certifies a descent.

    ``prefix`` is the as-built product law for dimensions 1..d; the append
    law becomes coordinate d+1.  Requires d >= n+8 unless explicitly allowed
    (below that the finite-moment guarantees do not apply).
    """
    d = len(prefix)
    if d < n + BASE_BLOCK_EXTRA and not allow_below_threshold:
        raise ValueError(
            f"descent design needs d >= n+{BASE_BLOCK_EXTRA} (got d={d}, n={n}); "
            "pass allow_below_threshold=True to experiment outside the guarantees"
        )
    return _grid_search(
        prefix,
        n,
        Arrow.DOWN,
        lambda s: Gaussian(sigma=s),
        eta,
        beta if beta is not None else ZeroBeta(),
        seed,
        0.0,
        budget,
        start_trials,
        threads,
        start_exp,
    )


def choose_ascent_params(
    prefix: ProductLaw,
    n: int,
    eta: float,
    seed: int,
    margin: float = 0.0,
    beta: Optional[BetaSpec] = None,
    budget: int = DEFAULT_BUDGET,
    start_trials: int = DEFAULT_START_TRIALS,
    threads: int = 1,
    allow_below_threshold: bool = False,
    start_exp: int = 0,
) -> tuple[TrimodalMix, StepCertification]:
    """Mixture parameters that certify an ascent exceeding ``margin``.

    Overparametrized appends couple mu = 1/sigma^2; underparametrized ones
    fix mu = 1 (an append there needs d+1 < n).  The walk stops at the first
    sigma with delta_mean - 3 stderr > margin.
    """
    d = len(prefix)
    if d < n:
        if d + 1 >= n:
            raise ValueError(f"underparametrized ascent needs d+1 < n, got d={d}, n={n}")
        make_law = lambda s: TrimodalMix(sigma=s, mu=1.0)
    else:
        if d < n + BASE_BLOCK_EXTRA and not allow_below_threshold:
            raise ValueError(
                f"overparametrized ascent design needs d >= n+{BASE_BLOCK_EXTRA} "
                f"(got d={d}, n={n}); pass allow_below_threshold=True to experiment"
            )
        make_law = lambda s: TrimodalMix(sigma=s, mu=1.0 / s**2)
    return _grid_search(
        prefix,
        n,
        Arrow.UP,
        make_law,
        eta,
        beta if beta is not None else ZeroBeta(),
        seed,
        margin,
        budget,
        start_trials,
        threads,
        start_exp,
    )


@dataclass(frozen=True)
class RhoChoice:
    """Selected beta scale and the per-descent-step caps it was taken from."""

    rho: float
    per_step: dict  # d_from -> rho_d cap estimate


def _rho_cap(
    laws: ProductLaw, d: int, n: int, eta: float, trials: int, seed: int, threads: int
) -> float:
    """Conservative cap: eta * sqrt(lcb(E|(A^T A)^+ x|^2) / (ucb(E|(A^T)^+ x|^2) + 1))."""
    num, den = estimate_overparam_norms(laws.prefix(d), d, n, trials, seed, threads)
    num_lcb = max(num.mean - 3.0 * num.stderr, 1e-12)
    den_ucb = den.mean + 3.0 * den.stderr
    return eta * math.sqrt(num_lcb / (den_ucb + 1.0))


def choose_rho(
    plan: CurvePlan,
    trials: int,
    seed: int,
    threads: int = 1,
) -> RhoChoice:
    """Beta scale under which every designed descent step stays a descent.

    Estimates the cap at each descent step's starting dimension (under the
    as-built prefix), takes the minimum and halves it for safety.  With no
    descent steps rho is unconstrained and 1 is returned by convention.
    """
    base = plan.n + BASE_BLOCK_EXTRA
    per_step = {}
    for i, arrow in enumerate(plan.arrows):
        if arrow is Arrow.DOWN:
            d = base + i
            per_step[d] = _rho_cap(
                plan.laws, d, plan.n, plan.eta, trials, derive_seed(seed, "rho", d), threads
            )
    if not per_step:
        return RhoChoice(rho=1.0, per_step={})
    return RhoChoice(rho=RHO_SAFETY * min(per_step.values()), per_step=per_step)


def design_curve(
    n: int,
    D: int,
    arrows,
    eta: float,
    beta_mode: str,
    seed: int,
    budget: int = DEFAULT_BUDGET,
    start_trials: int = DEFAULT_START_TRIALS,
    rho_trials: int = 100_000,
    threads: int = 1,
) -> CurvePlan:
    """Build a product law whose risk curve follows ``arrows`` from d = n+8.

    The first n+8 coordinates are standard Gaussian; each arrow then picks
    the next coordinate's law by certified search (down -> Gaussian(sigma),
    up -> mixture(sigma, mu)).  In gaussian beta mode the finished plan gets
    a rho from :func:`choose_rho` and every step is re-certified under the
    beta-averaged risk at that rho; steps that fail re-certification resume
    their grid walk at a smaller sigma.
    """
    arrows = tuple(arrows)
    base = n + BASE_BLOCK_EXTRA
    if D < base + 1:
        raise ValueError(f"D={D} leaves nothing to design; need D >= n+{BASE_BLOCK_EXTRA + 1}")
    if len(arrows) != D - base:
        raise ValueError(f"need {D - base} arrows for n={n}, D={D}, got {len(arrows)}")
    if eta <= 0:
        raise ValueError("eta must be positive")

    laws = [StdGaussian()] * base
    chosen_exp: list[int] = []  # grid exponent per step, for refinement restarts
    certs: list[StepCertification] = []

    for i, arrow in enumerate(arrows):
        d = base + i
        prefix = ProductLaw(tuple(laws))
        step_seed = derive_seed(seed, "step", d)
        if arrow is Arrow.DOWN:
            beta_cert: BetaSpec = ZeroBeta()
            if beta_mode == "gaussian":
                # certify descents at the step's own cap; the beta-averaged
                # difference grows with rho, so any smaller final rho keeps it
                cap = _rho_cap(
                    prefix, d, n, eta, rho_trials, derive_seed(seed, "cap", d), threads
                )
                beta_cert = GaussianBeta(cap)
            law, cert = choose_descent_sigma(
                prefix, n, eta, step_seed, beta=beta_cert,
                budget=budget, start_trials=start_trials, threads=threads,
            )
        else:
            law, cert = choose_ascent_params(
                prefix, n, eta, step_seed,
                budget=budget, start_trials=start_trials, threads=threads,
            )
        laws.append(law)
        chosen_exp.append(round(-math.log2(law.sigma)))
        certs.append(cert)

    plan = CurvePlan(
        n=n, D=D, eta=eta, beta_mode=beta_mode,
        laws=ProductLaw(tuple(laws)),
        rho=None if beta_mode == "zero" else 1.0,  # placeholder until chosen
        certifications=tuple(certs),
    )
    if beta_mode == "zero":
        return plan

    # gaussian mode: pick rho over the finished plan, then re-certify each
    # step under the beta-averaged risk at that rho
    for round_idx in range(3):
        choice = choose_rho(plan, rho_trials, derive_seed(seed, "rho-round", round_idx), threads)
        beta = GaussianBeta(choice.rho)
        new_certs = []
        refined = False
        for i, arrow in enumerate(arrows):
            d = base + i
            law = plan.laws.laws[d]
            delta, status = certify_append(
                plan.laws.prefix(d), n, law, arrow, eta, beta,
                derive_seed(seed, "recert", round_idx, d),
                budget=budget, start_trials=start_trials, threads=threads,
            )
            if status != "certified":
                # resume the walk below the current sigma under the exp-risk
                search = choose_descent_sigma if arrow is Arrow.DOWN else choose_ascent_params
                law, cert = search(
                    plan.laws.prefix(d), n, eta,
                    derive_seed(seed, "refine", round_idx, d),
                    beta=beta, budget=budget, start_trials=start_trials,
                    threads=threads, start_exp=chosen_exp[i] + 1,
                )
                new_laws = list(plan.laws.laws)
                new_laws[d] = law
                plan = replace(plan, laws=ProductLaw(tuple(new_laws)))
                chosen_exp[i] = round(-math.log2(law.sigma))
                new_certs.append(cert)
                refined = True
            else:
                new_certs.append(StepCertification(d, arrow, law, delta, "certified"))
        plan = replace(plan, rho=choice.rho, certifications=tuple(new_certs))
        if not refined:
            return plan
    raise BudgetExhausted(base, "gaussian-mode re-certification did not settle in 3 rounds")


@dataclass(frozen=True)
class VerifyStep:
    d_from: int
    arrow: Arrow
    delta: PairedDelta
    verdict: str  # "certified" | "inconclusive" | "flipped"


@dataclass(frozen=True)
class VerifyReport:
    steps: tuple[VerifyStep, ...]
    all_pass: bool
    suggested_trials: int


def verify_plan(
    plan: CurvePlan,
    trials: int,
    seed: int,
    threads: int = 1,
    underparam_prefix: bool = False,
) -> VerifyReport:
    """Independent re-certification of every designed step of a plan.

    Each step gets a fresh paired estimate at the plan's beta mode; a step
    passes when the difference matches its arrow at three standard errors.
    With ``underparam_prefix`` the underparametrized steps d < n-1 are also
    checked; those must report an ascent whatever the law.
    """
    beta = plan.beta_spec()
    base = plan.n + BASE_BLOCK_EXTRA
    steps = []
    if underparam_prefix:
        for d in range(1, plan.n - 1):
            delta = estimate_delta(
                plan.laws.prefix(d), d, plan.n, plan.laws.laws[d],
                plan.eta, beta, trials, derive_seed(seed, "verify-under", d),
                threads=threads,
            )
            verdict = "certified" if _matches_arrow(delta, Arrow.UP) else "inconclusive"
            steps.append(VerifyStep(d, Arrow.UP, delta, verdict))
    for i, arrow in enumerate(plan.arrows):
        d = base + i
        delta = estimate_delta(
            plan.laws.prefix(d), d, plan.n, plan.laws.laws[d],
            plan.eta, beta, trials, derive_seed(seed, "verify", d),
            threads=threads,
        )
        if _matches_arrow(delta, arrow):
            verdict = "certified"
        elif _conclusively_fails(delta, arrow):
            verdict = "flipped"
        else:
            verdict = "inconclusive"
        steps.append(VerifyStep(d, arrow, delta, verdict))
    all_pass = all(s.verdict == "certified" for s in steps)
    return VerifyReport(steps=tuple(steps), all_pass=all_pass, suggested_trials=trials * 4)
