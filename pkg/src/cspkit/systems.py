"""Registry of demo fast-slow systems."""

from __future__ import annotations

import numpy as np

from .mmh import MmhParams, mmh_system
from .system_core import SystemDefinition


def linear2d(a: float = 0.5, b: float = 0.0, domain=(0.1, 2.0), fast_box=(-2.0, 2.0)) -> SystemDefinition:
    """y' = -eps y,  z' = -z + (a + b eps) y.

    The slow manifold is exactly z = (a + b eps) / (1 - eps) * y.
    """

    def g1(y, z, eps):
        return -y

    def g2(y, z, eps):
        return -z + (a + b * eps) * y

    def jac(y, z, eps):
        return np.array([[-eps, 0.0], [a + b * eps, -1.0]])

    return SystemDefinition(
        m=1, n=1, g1=g1, g2=g2, jacobian=jac,
        domain_K=((domain[0],), (domain[1],)), fast_box=((fast_box[0],), (fast_box[1],)),
        name="linear2d", params={"a": a, "b": b},
    )


def linear2d_slow_slope(a: float, b: float, eps: float) -> float:
    return (a + b * eps) / (1.0 - eps)


def tilted(domain=(0.1, 2.0), fast_box=(-1.0, 1.0)) -> SystemDefinition:
    """Nonlinear system whose fast fibers are straight, non-parallel lines.

    It is the image of ``u' = -eps u, w' = -w`` under ``y = u (1 + eps w), z = w``,
    so the slow manifold is ``z = 0`` and the fiber with base ``(u, 0)`` is the
    line through it with direction ``(eps u, 1)``.
    """

    def g1(y, z, eps):
        return -y * (1.0 + (1.0 + eps) * z) / (1.0 + eps * z)

    def g2(y, z, eps):
        return -z

    def jac(y, z, eps):
        yy, zz = y[0], z[0]
        d = 1.0 + eps * zz
        return np.array([
            [-eps * (1.0 + (1.0 + eps) * zz) / d, -eps * yy / d ** 2],
            [0.0, -1.0],
        ])

    return SystemDefinition(
        m=1, n=1, g1=g1, g2=g2, jacobian=jac,
        domain_K=((domain[0],), (domain[1],)), fast_box=((fast_box[0],), (fast_box[1],)),
        name="tilted", params={},
    )


def tilted_exact_base(x0, eps: float) -> np.ndarray:
    y0, z0 = float(x0[0]), float(x0[1])
    return np.array([y0 / (1.0 + eps * z0), 0.0])


def tilted_fiber_direction(u: float, eps: float) -> np.ndarray:
    return np.array([eps * u, 1.0])


def get_system(name: str, **params) -> SystemDefinition:
    if name == "mmh":
        kappa = params.pop("kappa", 1.0)
        lam = params.pop("lambda", params.pop("lam", 0.5))
        return mmh_system(MmhParams(kappa, lam), **params)
    if name == "linear2d":
        return linear2d(**params)
    if name == "tilted":
        return tilted(**params)
    raise KeyError(f"unknown system {name!r}; known: {sorted(SYSTEMS)}")


SYSTEMS = ("mmh", "linear2d", "tilted")
