"""Closed-form reference results for the Michaelis-Menten-Henri model.

    s' = eps * (-s + (s + kappa - lambda) c)
    c' = s - (s + kappa) c

``s`` is slow, ``c`` is fast.  Everything here is an exact transcription of
truncated asymptotic expansions (through eps**2); the numerical pipeline is
validated against these functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system_core import SystemDefinition


@dataclass(frozen=True)
class MmhParams:
    kappa: float = 1.0
    lam: float = 0.5

    def __post_init__(self):
        if not (self.kappa > self.lam > 0):
            raise ValueError(f"MMH needs kappa > lambda > 0, got kappa={self.kappa}, lambda={self.lam}")


def mmh_system(p: MmhParams = MmhParams(), domain=(0.1, 2.0), fast_box=(-0.5, 1.5)) -> SystemDefinition:
    k, lam = p.kappa, p.lam

    def g1(y, z, eps):
        s, c = y[0], z[0]
        return np.array([-s + (s + k - lam) * c])

    def g2(y, z, eps):
        s, c = y[0], z[0]
        return np.array([s - (s + k) * c])

    def jac(y, z, eps):
        s, c = y[0], z[0]
        return np.array([
            [eps * (c - 1.0), eps * (s + k - lam)],
            [1.0 - c, -(s + k)],
        ])

    return SystemDefinition(
        m=1, n=1, g1=g1, g2=g2, jacobian=jac,
        domain_K=((domain[0],), (domain[1],)),
        fast_box=((fast_box[0],), (fast_box[1],)),
        name="mmh", params={"kappa": k, "lambda": lam},
    )


def h0(s, p: MmhParams):
    return s / (s + p.kappa)


def h1(s, p: MmhParams):
    k, lam = p.kappa, p.lam
    return k * lam * s / (s + k) ** 4


def h2(s, p: MmhParams):
    k, lam = p.kappa, p.lam
    return k * lam * s * (2 * k * lam - 3 * lam * s - k * s - k ** 2) / (s + k) ** 7


def h0_slope(s, p: MmhParams):
    return p.kappa / (s + p.kappa) ** 2


def mmh_slow_series(s, p: MmhParams, eps: float = 0.0, order: int = 2):
    """Slow manifold h_eps(s) truncated after the eps**order term."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    out = h0(s, p)
    if order >= 1:
        out = out + eps * h1(s, p)
    if order >= 2:
        out = out + eps ** 2 * h2(s, p)
    return out


def mmh_cspm_closed(s, p: MmhParams, eps: float, q: int):
    """CSP manifold of order q (1 or 2) through eps**2."""
    k, lam = p.kappa, p.lam
    if q == 1:
        return h0(s, p) + eps * h1(s, p) - eps ** 2 * k ** 2 * lam * s * (s + k - lam) / (s + k) ** 7
    if q == 2:
        return h0(s, p) + eps * h1(s, p) + eps ** 2 * h2(s, p)
    raise ValueError(f"closed-form CSPM only for q in (1, 2), got {q}")


def fiber_tangent_coefficients(s, p: MmhParams):
    """(alpha, beta, gamma) used when matching CSP fast vectors to the fiber tangent."""
    k, lam = p.kappa, p.lam
    sk = s + k
    beta = -k * (sk - lam) / sk ** 3
    gamma = ((sk - lam) * (k ** 2 * (sk - 2 * lam) + k * lam * s) + k * lam ** 2 * s) / sk ** 6
    return 1.0, beta, gamma


def mmh_fiber_tangent(s, p: MmhParams, eps: float, order: int = 2, s1=0.0):
    """Tangent to the fast fiber at base point s, truncated at eps**order.

    ``s1`` is the O(eps) part of the slow coordinate of the initial data; it
    is zero when the tangent is taken exactly at the base point.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    k, lam = p.kappa, p.lam
    sk = s + k
    alpha, beta, gamma = fiber_tangent_coefficients(s, p)
    slow = 0.0
    fast = alpha
    if order >= 1:
        slow = slow - eps * (1 - lam / sk) * alpha
        fast = fast + eps * beta
    if order >= 2:
        slow = slow - eps ** 2 * (
            (1 - lam / sk) * beta + lam / sk ** 2 * (s1 + (k * (sk - lam) - lam * s) / sk ** 2) * alpha
        )
        fast = fast + eps ** 2 * gamma
    return np.array([slow, fast], dtype=float)


def mmh_A1_closed(s, p: MmhParams, eps: float, q: int):
    """Fast CSP basis vector A_1^(q) on the order-q CSP manifold, through eps**2.

    For q=1 the slow entry is -eps (s+kappa-lambda)/(s+kappa); the fast entry
    follows from substituting the order-1 manifold into the general-point
    basis vector.
    """
    k, lam = p.kappa, p.lam
    sk = s + k
    if q == 1:
        slow = -eps * (sk - lam) / sk
        fast = 1 - eps * k * (sk - lam) / sk ** 3 + eps ** 2 * k * lam * s * (sk - lam) / sk ** 6
    elif q == 2:
        slow = -eps * (sk - lam) / sk + eps ** 2 * (k * (sk - 2 * lam) * (sk - lam) + lam ** 2 * s) / sk ** 4
        fast = (1 - eps * k * (sk - lam) / sk ** 3
                + eps ** 2 * ((sk - lam) * (k ** 2 * (sk - 2 * lam) + k * lam * s) + k * lam ** 2 * s) / sk ** 6)
    else:
        raise ValueError(f"closed-form A_1 only for q in (1, 2), got {q}")
    return np.array([slow, fast], dtype=float)


def mmh_basis1_general(s, c, p: MmhParams, eps: float):
    """A^(1) at an arbitrary point (s, c), columns (A_1, A_2) in (slow, fast) rows."""
    k, lam = p.kappa, p.lam
    sk = s + k
    r = (sk - lam) / sk
    a1 = np.array([-eps * r, 1 + eps * r * (c - 1) / sk])
    a2 = np.array([1.0, -(c - 1) / sk])
    return np.column_stack([a1, a2])


def mmh_lambda0(s, c, p: MmhParams, eps: float):
    k, lam = p.kappa, p.lam
    return np.array([
        [-(s + k), -(c - 1)],
        [eps * (s + k - lam), eps * (c - 1)],
    ])


def mmh_lambda1(s, c, p: MmhParams, eps: float):
    """Blocks of Lambda_(1) at a general point, through eps**2 (fast index first)."""
    k, lam = p.kappa, p.lam
    sk = s + k
    w = (sk - lam) * c - s
    l11 = (-sk + eps * (sk - lam) / sk * ((c - 1) + (c - s / sk))
           + eps ** 2 * (c - 1) * (sk - lam) / sk ** 3 * (-lam * (c - 1) + w))
    l12 = s / sk - c + eps * (c - 1) / sk ** 2 * (lam * (c - 1) - w)
    l21 = eps ** 2 / sk ** 2 * ((c - 1) * (sk - lam) * (sk - 2 * lam) + lam * w + (sk - lam) ** 2 * (c - s / sk))
    l22 = (eps / sk * (lam * (c - 1) + (sk - lam) * (s / sk - c))
           + eps ** 2 * (c - 1) * (sk - lam) / sk ** 3 * (lam * (c - 1) - w))
    return np.array([[l11, l12], [l21, l22]])


def fiber_shift_condition(s0, p: MmhParams, dc0):
    """First-order slow offset that keeps two points on one fast fiber."""
    k, lam = p.kappa, p.lam
    return -(s0 + k - lam) / (s0 + k) * dc0


def fast_decay_rate(s0, p: MmhParams):
    return -(s0 + p.kappa)
