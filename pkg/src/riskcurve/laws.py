"""Feature laws: per-coordinate sampling distributions and their transforms.

Three one-dimensional laws are supported, all with mean zero:

* ``StdGaussian``          -- N(0, 1)
* ``Gaussian(sigma)``      -- N(0, sigma^2)
* ``TrimodalMix(sigma, mu)`` -- equal-weight mixture of N(0, sigma^2),
  N(-mu, sigma^2) and N(+mu, sigma^2)

A ``ProductLaw`` is an ordered tuple of feature laws; its length-d prefix
defines the joint law of the first d coordinates of a data point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

__all__ = [
    "StdGaussian",
    "Gaussian",
    "TrimodalMix",
    "FeatureLaw",
    "ProductLaw",
    "normal_cdf",
    "mix_pdf",
    "mix_cdf",
    "mix_quantile",
    "phi_map",
    "sample",
    "sample_array",
    "sample_row",
    "sample_block",
    "law_to_fields",
    "law_from_fields",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class StdGaussian:
    """Standard Gaussian feature, N(0, 1)."""

    kind = "std_gaussian"

    @property
    def variance(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Gaussian:
    """Centered Gaussian feature, N(0, sigma^2)."""

    sigma: float
    kind = "gaussian"

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a positive finite real, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma**2


@dataclass(frozen=True)
class TrimodalMix:
    """Equal-weight mixture of N(0, s^2), N(-mu, s^2), N(+mu, s^2).

    Mean is zero by symmetry; the second moment is 2*mu^2/3 + sigma^2.
    """

    sigma: float
    mu: float
    kind = "trimodal"

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a positive finite real, got {self.sigma}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be a positive finite real, got {self.mu}")

    @property
    def variance(self) -> float:
        return self.sigma**2 + 2.0 * self.mu**2 / 3.0


FeatureLaw = Union[StdGaussian, Gaussian, TrimodalMix]


@dataclass(frozen=True)
class ProductLaw:
    """Product of independent feature laws, one per coordinate.

    ``laws[j]`` governs coordinate j (0-based here; prose about data uses
    1-based x[1:d]).  The prefix of length d is the joint law of the first
    d coordinates.
    """

    laws: tuple[FeatureLaw, ...]

    def __post_init__(self) -> None:
        if len(self.laws) < 1:
            raise ValueError("a product law needs at least one coordinate")

    def __len__(self) -> int:
        return len(self.laws)

    def prefix(self, d: int) -> "ProductLaw":
        if not 1 <= d <= len(self.laws):
            raise ValueError(f"prefix length {d} outside [1, {len(self.laws)}]")
        return ProductLaw(self.laws[:d])

    @classmethod
    def uniform(cls, law: FeatureLaw, dim: int) -> "ProductLaw":
        """All ``dim`` coordinates drawn from the same law."""
        return cls((law,) * dim)


def normal_cdf(x):
    """Standard normal CDF via the complementary error function.

    Accurate to roughly 1e-15 absolute, which the quantile tolerance needs.
    """
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def mix_pdf(t, sigma: float, mu: float):
    """Density of the trimodal mixture at t."""
    t = np.asarray(t, dtype=float)
    c = 1.0 / (3.0 * sigma * math.sqrt(2.0 * math.pi))
    return c * (
        np.exp(-0.5 * (t / sigma) ** 2)
        + np.exp(-0.5 * ((t - mu) / sigma) ** 2)
        + np.exp(-0.5 * ((t + mu) / sigma) ** 2)
    )


def mix_cdf(t, sigma: float, mu: float):
    """CDF of the trimodal mixture: average of the three shifted normal CDFs."""
    t = np.asarray(t, dtype=float)
    out = (
        normal_cdf(t / sigma)
        + normal_cdf((t + mu) / sigma)
        + normal_cdf((t - mu) / sigma)
    ) / 3.0
    if out.ndim == 0:
        return float(out)
    return out


def mix_quantile(p: float, sigma: float, mu: float) -> float:
    """Inverse CDF of the trimodal mixture by bracketed root finding.

    The bracket starts at +-(mu + 10*sigma) and doubles until it encloses p;
    the mixture tails are Gaussian so the expansion terminates fast.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    half = mu + 10.0 * sigma
    lo, hi = -half, half
    while mix_cdf(lo, sigma, mu) > p:
        lo *= 2.0
    while mix_cdf(hi, sigma, mu) < p:
        hi *= 2.0
    return brentq(lambda t: mix_cdf(t, sigma, mu) - p, lo, hi, xtol=1e-14)


def phi_map(g, sigma: float, mu: float):
    """Monotone map sending N(0,1) draws to trimodal-mixture draws.

    Composition of the standard normal CDF with the mixture quantile; a
    scalar or an array of evaluation points is accepted.
    """
    g_arr = np.asarray(g, dtype=float)
    p = normal_cdf(g_arr)
    if g_arr.ndim == 0:
        return mix_quantile(float(p), sigma, mu)
    flat = np.array([mix_quantile(pi, sigma, mu) for pi in np.ravel(p)])
    return flat.reshape(g_arr.shape)


def sample(law: FeatureLaw, rng: np.random.Generator) -> float:
    """One draw from a feature law."""
    return float(sample_array(law, rng, ()))


def sample_array(law: FeatureLaw, rng: np.random.Generator, shape) -> np.ndarray:
    """Draw an array of the given shape from a feature law.

    Mixture draws pick a component uniformly over {center, -mu, +mu} and add
    a Gaussian(sigma) perturbation; this is exact and cheaper than the
    quantile transform (`phi_map` remains as the tested-equivalent path).
    """
    if isinstance(law, StdGaussian):
        return rng.standard_normal(shape)
    if isinstance(law, Gaussian):
        return law.sigma * rng.standard_normal(shape)
    if isinstance(law, TrimodalMix):
        offsets = np.array([0.0, -law.mu, law.mu])
        comp = rng.integers(0, 3, size=shape)
        return offsets[comp] + law.sigma * rng.standard_normal(shape)
    raise TypeError(f"not a feature law: {law!r}")


def sample_row(law: ProductLaw, d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the first d coordinates of one data point, coordinate-wise."""
    if not 1 <= d <= len(law):
        raise ValueError(f"d={d} outside [1, {len(law)}]")
    return np.array([sample(law.laws[j], rng) for j in range(d)])


def sample_block(
    law: ProductLaw, d: int, rng: np.random.Generator, leading_shape: tuple
) -> np.ndarray:
    """Draw a (*leading_shape, d) block, column j from law j.

    Columns are drawn in index order so the output is a pure function of the
    generator state; batched estimators rely on that for reproducibility.
    """
    if not 1 <= d <= len(law):
        raise ValueError(f"d={d} outside [1, {len(law)}]")
    out = np.empty(tuple(leading_shape) + (d,))
    for j in range(d):
        out[..., j] = sample_array(law.laws[j], rng, tuple(leading_shape))
    return out


def law_to_fields(law: FeatureLaw) -> dict:
    """Serialize a law to its plan-file fields (kind plus parameters)."""
    if isinstance(law, StdGaussian):
        return {"kind": "std_gaussian"}
    if isinstance(law, Gaussian):
        return {"kind": "gaussian", "sigma": law.sigma}
    if isinstance(law, TrimodalMix):
        return {"kind": "trimodal", "sigma": law.sigma, "mu": law.mu}
    raise TypeError(f"not a feature law: {law!r}")


def law_from_fields(fields: dict) -> FeatureLaw:
    """Inverse of :func:`law_to_fields`."""
    kind = fields.get("kind")
    if kind == "std_gaussian":
        return StdGaussian()
    if kind == "gaussian":
        return Gaussian(sigma=float(fields["sigma"]))
    if kind == "trimodal":
        return TrimodalMix(sigma=float(fields["sigma"]), mu=float(fields["mu"]))
    raise ValueError(f"unknown law kind: {kind!r}")
