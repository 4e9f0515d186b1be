"""Random factors and 1-d support partitions.

Three factor kinds cover the models in scope: point masses, uniforms,
and truncated normals. Factors expose their CDF, per-cell probabilities
and conditional means, and inverse-CDF sampling. Partitions carve the
support [lo, hi) into uniform cells with one representative value and
one probability weight per cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

_SQRT_2PI = np.sqrt(2.0 * np.pi)

KINDS = ("constant", "uniform", "truncated_normal")
REPRESENTATIVE_RULES = ("lower_endpoint", "conditional_mean", "midpoint")


@dataclass(frozen=True)
class RandomFactor:
    """A scalar random factor with bounded support.

    params by kind:
        constant         -> (value,)
        uniform          -> (lo, hi)
        truncated_normal -> (mu, sigma, lo, hi), the N(mu, sigma^2)
                            density restricted to [lo, hi) and renormalized
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown factor kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if self.kind == "constant":
            if len(params) != 1:
                raise ValueError("constant factor takes a single value")
        elif self.kind == "uniform":
            if len(params) != 2 or not params[0] < params[1]:
                raise ValueError("uniform factor requires lo < hi")
        else:
            if len(params) != 4:
                raise ValueError("truncated_normal takes (mu, sigma, lo, hi)")
            mu, sigma, lo, hi = params
            if sigma <= 0:
                raise ValueError("truncated_normal requires sigma > 0")
            if not lo < hi:
                raise ValueError("truncated_normal requires lo < hi")

    @staticmethod
    def constant(value):
        return RandomFactor("constant", (value,))

    @staticmethod
    def uniform(lo, hi):
        return RandomFactor("uniform", (lo, hi))

    @staticmethod
    def truncated_normal(mu, sigma, lo, hi):
        return RandomFactor("truncated_normal", (mu, sigma, lo, hi))

    @property
    def is_constant(self):
        return self.kind == "constant"

    @property
    def support(self):
        """(lo, hi); degenerate (v, v) for constants."""
        if self.kind == "constant":
            v = self.params[0]
            return (v, v)
        if self.kind == "uniform":
            return self.params
        return self.params[2:]

    def mean(self):
        """Exact mean of the factor."""
        if self.kind == "constant":
            return self.params[0]
        lo, hi = self.support
        return cell_conditional_mean(self, lo, np.nextafter(hi, np.inf))

    def _tn_state(self):
        mu, sigma, lo, hi = self.params
        za = (lo - mu) / sigma
        zb = (hi - mu) / sigma
        mass = ndtr(zb) - ndtr(za)
        return mu, sigma, za, zb, mass


def cdf(factor, x):
    """Distribution function of the factor; vectorized in x.

    Equal to 0 at/below the support's lower end and 1 at/above its
    upper end (constants jump at their value).
    """
    x = np.asarray(x, dtype=float)
    if factor.kind == "constant":
        out = np.where(x >= factor.params[0], 1.0, 0.0)
    elif factor.kind == "uniform":
        lo, hi = factor.params
        out = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    else:
        mu, sigma, za, zb, mass = factor._tn_state()
        out = np.clip((ndtr((x - mu) / sigma) - ndtr(za)) / mass, 0.0, 1.0)
        lo, hi = factor.support
        out = np.where(x <= lo, 0.0, out)
        out = np.where(x >= hi, 1.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def pdf(factor, x):
    """Density of the factor (vectorized); zero outside the support.

    Constants have no density; requesting one is an error.
    """
    if factor.kind == "constant":
        raise ValueError("constant factors have no density")
    x = np.asarray(x, dtype=float)
    lo, hi = factor.support
    if factor.kind == "uniform":
        out = np.where((x >= lo) & (x < hi), 1.0 / (hi - lo), 0.0)
    else:
        mu, sigma, za, zb, mass = factor._tn_state()
        z = (x - mu) / sigma
        out = np.exp(-0.5 * z * z) / (_SQRT_2PI * sigma * mass)
        out = np.where((x >= lo) & (x < hi), out, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def cell_probability(factor, a, b):
    """P(a <= X < b) = cdf(b) - cdf(a)."""
    if not a < b:
        raise ValueError("cell requires a < b")
    return max(cdf(factor, b) - cdf(factor, a), 0.0)


def cell_conditional_mean(factor, a, b):
    """E[X | X in [a, b)]; cells of probability zero get the midpoint."""
    if not a < b:
        raise ValueError("cell requires a < b")
    if factor.kind == "constant":
        v = factor.params[0]
        if a <= v < b:
            return v
        return 0.5 * (a + b)
    if cell_probability(factor, a, b) == 0.0:
        return 0.5 * (a + b)
    lo, hi = factor.support
    ca, cb = max(a, lo), min(b, hi)
    if factor.kind == "uniform":
        return 0.5 * (ca + cb)
    mu, sigma, za, zb, mass = factor._tn_state()
    zca = max((ca - mu) / sigma, za)
    zcb = min((cb - mu) / sigma, zb)
    phi_a = np.exp(-0.5 * zca * zca) / _SQRT_2PI
    phi_b = np.exp(-0.5 * zcb * zcb) / _SQRT_2PI
    denom = ndtr(zcb) - ndtr(zca)
    return mu + sigma * (phi_a - phi_b) / denom


def ppf(factor, u):
    """Inverse CDF; vectorized in u over [0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u > 1.0)):
        raise ValueError("ppf argument must lie in [0, 1]")
    if factor.kind == "constant":
        out = np.full_like(u, factor.params[0])
    elif factor.kind == "uniform":
        lo, hi = factor.params
        out = lo + u * (hi - lo)
    else:
        mu, sigma, za, zb, mass = factor._tn_state()
        fa = ndtr(za)
        out = mu + sigma * ndtri(fa + u * mass)
        lo, hi = factor.support
        out = np.clip(out, lo, hi)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Partition1D:
    """Uniform cells over a factor support with representatives and weights."""

    breakpoints: np.ndarray
    representatives: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        rep = np.asarray(self.representatives, dtype=float)
        pr = np.asarray(self.probabilities, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("breakpoints must be a 1-d array of length >= 2")
        degenerate = bp.size == 2 and bp[0] == bp[1]
        if not degenerate and np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if rep.shape != (bp.size - 1,) or pr.shape != rep.shape:
            raise ValueError("need one representative and one probability per cell")
        if np.any(pr < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(pr.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        if not degenerate and (np.any(rep < bp[:-1]) or np.any(rep > bp[1:])):
            raise ValueError("each representative must lie within its cell")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "representatives", rep)
        object.__setattr__(self, "probabilities", pr)

    @property
    def n_cells(self):
        return self.representatives.size


def make_partition(factor, n_cells, representative_rule="lower_endpoint"):
    """Uniform partition of the factor support into n_cells cells.

    Representatives follow the rule: the cell's lower endpoint, its
    conditional mean, or its midpoint. Conditional means of cells with
    probability zero fall back to the midpoint (such cells carry weight
    zero and never contribute to aggregates). Constants always yield
    the single-cell partition regardless of n_cells.
    """
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if representative_rule not in REPRESENTATIVE_RULES:
        raise ValueError(f"unknown representative rule {representative_rule!r}")
    if factor.is_constant:
        v = factor.params[0]
        return Partition1D(np.array([v, v]), np.array([v]), np.array([1.0]))
    lo, hi = factor.support
    bp = np.linspace(lo, hi, n_cells + 1)
    bp[0], bp[-1] = lo, hi
    probs = np.diff(cdf(factor, bp))
    np.maximum(probs, 0.0, out=probs)
    if representative_rule == "lower_endpoint":
        reps = bp[:-1].copy()
    elif representative_rule == "midpoint":
        reps = 0.5 * (bp[:-1] + bp[1:])
    else:
        reps = np.array([cell_conditional_mean(factor, bp[i], bp[i + 1])
                         for i in range(n_cells)])
    return Partition1D(bp, reps, probs)
