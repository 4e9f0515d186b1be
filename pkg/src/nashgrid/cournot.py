"""Cournot oligopoly with randomly perturbed costs and demand price.

Firm i produces q_i at cost

    f_i(q_i) = (c_i + r) q_i + beta_i * (b_i/(b_i+1)) k_i^{-1/b_i} q_i^{(b_i+1)/b_i}

and the commodity sells at the scarcity-capped power-law price

    p(Q) = s^a / (Q + e)^a,        Q = sum_i q_i,  0 < a < 1,  e > 0,

possibly shifted by alpha. The scalars r, s, alpha and the vector beta
are realizations of bounded random factors. Firm welfare is revenue
minus cost, w_i = (p(Q) + alpha) q_i - f_i(q_i), and the Nash
equilibrium operator is the negative welfare gradient,

    F_i(q) = c_i + r + beta_i k_i^{-1/b_i} q_i^{1/b_i}
             + a s^a q_i/(Q+e)^{a+1} - s^a/(Q+e)^a - alpha.

F is strictly monotone on the nonnegative orthant for 0 < a < 1, which
makes every boxed equilibrium problem uniquely solvable.

All evaluators accept a single point of shape (m,) or a batch of shape
(B, m) and run the identical numpy expression sequence either way, so a
batched solve and a pointwise recheck produce bitwise-equal values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import RandomFactor


@dataclass(frozen=True)
class FirmParams:
    """One firm: linear cost c, scale k, curvature b, production bound."""

    c: float
    k: float
    b: float
    q_bar: RandomFactor

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "b", float(self.b))
        if self.c < 0:
            raise ValueError("linear cost coefficient c must be >= 0")
        if self.k <= 0:
            raise ValueError("cost scale k must be > 0")
        if self.b <= 0:
            raise ValueError("cost curvature b must be > 0")
        if not isinstance(self.q_bar, RandomFactor):
            raise TypeError("q_bar must be a RandomFactor")
        if self.q_bar.support[0] < 0:
            raise ValueError("production bound support must be nonnegative")


@dataclass(frozen=True)
class CournotInstance:
    """The full market: firms plus the random perturbation factors.

    r_factor shifts every linear cost, s_factor scales the price,
    beta_factors (default constant 1) modulate the power-law cost terms,
    alpha_factor (default constant 0) shifts the price additively.
    """

    firms: tuple
    a: float
    e: float
    r_factor: RandomFactor
    s_factor: RandomFactor
    beta_factors: Optional[tuple] = None
    alpha_factor: Optional[RandomFactor] = None

    def __post_init__(self):
        firms = tuple(self.firms)
        if not firms or not all(isinstance(f, FirmParams) for f in firms):
            raise ValueError("firms must be a nonempty sequence of FirmParams")
        object.__setattr__(self, "firms", firms)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "e", float(self.e))
        if not 0.0 < self.a < 1.0:
            raise ValueError("price exponent a must lie in (0, 1)")
        if self.e <= 0:
            raise ValueError("price floor parameter e must be > 0")
        if self.s_factor.support[0] <= 0:
            raise ValueError("price scale factor support must be positive")
        betas = self.beta_factors
        if betas is None:
            betas = tuple(RandomFactor.constant(1.0) for _ in firms)
        else:
            betas = tuple(betas)
            if len(betas) != len(firms):
                raise ValueError("need one beta factor per firm")
            for bf in betas:
                if bf.support[0] <= 0:
                    raise ValueError("beta factor supports must be positive")
        object.__setattr__(self, "beta_factors", betas)
        if self.alpha_factor is None:
            object.__setattr__(self, "alpha_factor", RandomFactor.constant(0.0))
        # frozen coefficient arrays for the vectorized operator
        object.__setattr__(self, "_c", np.array([f.c for f in firms]))
        b = np.array([f.b for f in firms])
        k = np.array([f.k for f in firms])
        object.__setattr__(self, "_inv_b", 1.0 / b)
        object.__setattr__(self, "_cost_scale", k ** (-1.0 / b))

    @property
    def m(self):
        return len(self.firms)

    @property
    def bound_factors(self):
        return tuple(f.q_bar for f in self.firms)


def _total(q):
    # left-to-right column accumulation; bitwise identical for (m,)
    # and (B, m) inputs, unlike axis sums with data-dependent blocking
    out = np.zeros(q.shape[:-1])
    for j in range(q.shape[-1]):
        out = out + q[..., j]
    return out


def cost(firm, q, r, beta=1.0):
    """Production cost (c+r)q + beta*(b/(b+1)) k^{-1/b} q^{(b+1)/b}.

    Vectorized in q. The power term vanishes at q=0 for every b > 0.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("production quantity must be >= 0")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    b = firm.b
    power = beta * (b / (b + 1.0)) * firm.k ** (-1.0 / b) * q ** ((b + 1.0) / b)
    out = (firm.c + r) * q + power
    if out.ndim == 0:
        return float(out)
    return out


def price(instance, Q, s):
    """Demand price s^a/(Q+e)^a; vectorized in Q, strictly decreasing."""
    Q = np.asarray(Q, dtype=float)
    if np.any(Q < 0):
        raise ValueError("total quantity must be >= 0")
    if s <= 0:
        raise ValueError("price scale s must be > 0")
    out = s ** instance.a / (Q + instance.e) ** instance.a
    if out.ndim == 0:
        return float(out)
    return out


def price_part(instance, q, s):
    """The price-driven part of the operator, a s^a q/(Q+e)^{a+1} - s^a/(Q+e)^a.

    Accepts q of shape (m,) or (B, m).
    """
    q = np.asarray(q, dtype=float)
    a = instance.a
    sa = s ** a
    Qe = _total(q) + instance.e
    dens = Qe ** a
    return (a * sa) * q / (dens * Qe)[..., None] - (sa / dens)[..., None]


def operator_eval(instance, q, r, s, beta=None, alpha=0.0):
    """Equilibrium operator F(q; r, s, beta, alpha), the negative welfare gradient.

    Args:
        q: quantities, shape (m,) or (B, m), componentwise >= 0.
        r: additive cost shift, scalar or shape (B,).
        s: price scale, scalar > 0.
        beta: per-firm cost multipliers, shape (m,), default all ones.
        alpha: additive price shift, scalar.

    Returns:
        F with the shape of q. The random additive parts enter through
        one final addition of (r - alpha), so two calls differing only
        in (r, alpha) differ by a constant vector.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != instance.m:
        raise ValueError("q must have one component per firm")
    if np.any(q < 0):
        raise ValueError("quantities must be >= 0")
    if s <= 0:
        raise ValueError("price scale s must be > 0")
    if beta is None:
        beta = 1.0
    else:
        beta = np.asarray(beta, dtype=float)
        if np.any(beta <= 0):
            raise ValueError("beta must be > 0 componentwise")
    a = instance.a
    sa = s ** a
    # keep Qe an ndarray: the pow ufunc loop and np.float64.__pow__ can
    # round transcendentals differently, and single-point evaluations must
    # agree bitwise with the batched sweep
    Qe = np.asarray(_total(q) + instance.e)
    dens = Qe ** a
    marginal = beta * instance._cost_scale * np.power(q, instance._inv_b)
    base = (instance._c + marginal + (a * sa) * q / (dens * Qe)[..., None]
            - (sa / dens)[..., None])
    shift = np.asarray(r, dtype=float) - alpha
    return base + shift[..., None] if shift.ndim else base + float(shift)


def operator_eval_sampled(instance, q, r, s, beta, alpha):
    """Batched operator where every row has its own factor realization.

    Unlike operator_eval, which freezes (s, beta, alpha) across the
    batch, here all factors vary per row.

    Args:
        q: (B, m) quantities, componentwise >= 0.
        r, s, alpha: (B,) factor samples, s > 0.
        beta: (B, m) cost multipliers, > 0.

    Returns:
        (B, m) operator values.
    """
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if q.ndim != 2 or q.shape[1] != instance.m:
        raise ValueError("q must have shape (B, m)")
    if np.any(q < 0):
        raise ValueError("quantities must be >= 0")
    if np.any(s <= 0):
        raise ValueError("price scale s must be > 0")
    if np.any(beta <= 0):
        raise ValueError("beta must be > 0 componentwise")
    a = instance.a
    sa = s ** a
    Qe = _total(q) + instance.e
    dens = Qe ** a
    marginal = beta * instance._cost_scale * np.power(q, instance._inv_b)
    return (instance._c + marginal + ((a * sa) / (dens * Qe))[:, None] * q
            - (sa / dens)[:, None] + (r - alpha)[:, None])


def welfare(instance, i, q, r, s, beta=None, alpha=0.0):
    """Net revenue of firm i: (price(Q) + alpha) * q_i - cost_i(q_i)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (instance.m,):
        raise ValueError("q must be a vector with one component per firm")
    if not 0 <= i < instance.m:
        raise IndexError("firm index out of range")
    if beta is None:
        beta_i = 1.0
    else:
        beta_i = float(np.asarray(beta, dtype=float)[i])
    p = price(instance, float(_total(q)), s)
    return (p + alpha) * float(q[i]) - cost(instance.firms[i], float(q[i]), r, beta_i)


def jacobian_form_test(instance, q_point, h, s):
    """Quadratic form h^T J h of the price part's Jacobian at q_point.

    J = -p'(Q) (I + 11^T) - p''(Q) q 1^T with p' < 0 < p''; a positive
    value certifies local strict monotonicity of the price part.
    """
    q = np.asarray(q_point, dtype=float)
    h = np.asarray(h, dtype=float)
    if q.shape != h.shape or q.ndim != 1 or q.size != instance.m:
        raise ValueError("q_point and h must be vectors with one entry per firm")
    if not np.any(h != 0.0):
        raise ValueError("h must be nonzero")
    if np.any(q < 0):
        raise ValueError("quantities must be >= 0")
    a = instance.a
    sa = s ** a
    Qe = float(_total(q)) + instance.e
    p1 = -a * sa / Qe ** (a + 1.0)
    p2 = a * (a + 1.0) * sa / Qe ** (a + 2.0)
    sh = float(h.sum())
    return float(-p1 * (sh * sh + float(h @ h)) - p2 * float(q @ h) * sh)
