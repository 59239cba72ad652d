"""Bundled verification suites run by ``ymheat kernel-check`` and ``ymheat identities-check``."""

from dataclasses import dataclass
import math

import numpy as np

from .profiles import Theta0Spec
from .radialheat import hankel_evolve, heat_evolve, kernel_gamma
from .scalinglaw import (fubini_check, identity_first, integral_identities_check, mode_moment,
                         projection_constant)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self):
        return bool(math.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self):
        return {"name": self.name, "value": float(self.value), "tolerance": self.tolerance,
                "verdict": "PASS" if self.passed else "FAIL"}


def _bump(r):
    r = np.asarray(r, dtype=float)
    return np.where(r < 1.0, (1.0 - np.minimum(r, 1.0) ** 2) ** 4, 0.0)


def kernel_suite():
    """Golden checks of the radial heat kernel and the evolution routes."""
    checks = []
    worst = 0.0
    for r, t in ((0.0, 1.0), (3.0, 0.2), (10.0, 5.0)):
        v = heat_evolve(lambda s: np.ones_like(s), 0.0, t, [r], epsabs=1e-12, epsrel=1e-12)[0]
        worst = max(worst, abs(v - 1.0))
    checks.append(Check("constants_preserved", worst, 1e-8))

    lhs = kernel_gamma(6, 1.0, 2.0, 0.5) * 1.0 ** 5
    rhs = kernel_gamma(6, 2.0, 1.0, 0.5) * 2.0 ** 5
    checks.append(Check("detailed_balance", abs(lhs - rhs) / abs(rhs), 1e-12))

    r = np.linspace(0.0, 12.0, 61)
    worst = 0.0
    for t in (0.05, 1.0, 10.0):
        num = heat_evolve(lambda s: np.exp(-s * s), 0.0, t, r, epsabs=1e-300, epsrel=1e-12)
        exact = (1 + 4 * t) ** -3 * np.exp(-r * r / (1 + 4 * t))
        worst = max(worst, float(np.max(np.abs(num - exact)) / np.max(exact)))
    checks.append(Check("gaussian_closed_form", worst, 1e-6))

    smooth = np.cos  # smooth test function
    v = heat_evolve(smooth, 0.0, 1e-6, [1.0], epsabs=1e-13, epsrel=1e-13)[0]
    checks.append(Check("delta_limit", abs(v - math.cos(1.0)), 1e-5))

    rr = np.linspace(0.0, 3.0, 13)
    worst = 0.0
    for t in (0.01, 0.1, 0.5):
        direct = heat_evolve(_bump, 0.0, t, rr, epsabs=1e-13, epsrel=1e-12, breakpoints=(1.0,))
        spectral = hankel_evolve(_bump, 1.0, t, rr, n=6, quad_nodes=400)
        worst = max(worst, float(np.max(np.abs(direct - spectral))))
    checks.append(Check("hankel_cross_check", worst, 1e-5))
    return checks


def identity_samples(seed, count=20):
    """``count`` random ``(s, t, t0)`` with ``t >= s^2`` and ``t >= t0 > 0``."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.2, 5.0, count)
    t = s * s * rng.uniform(1.0, 50.0, count)
    t0 = t * rng.uniform(0.02, 1.0, count)
    return list(zip(s.tolist(), t.tolist(), t0.tolist()))


def identities_suite(seed=0, count=20):
    """Integral identities, Fubini exchange and the two projection constants."""
    checks = []
    samples = [(1.0, 4.0, 2.0)] + identity_samples(seed, count - 1)
    worst1 = worst2 = 0.0
    for s, t, t0 in samples:
        r1, r2 = integral_identities_check(s, t, t0)
        worst1, worst2 = max(worst1, r1), max(worst2, r2)
    checks.append(Check("identity_first", worst1, 1e-10))
    checks.append(Check("identity_second", worst2, 1e-10))
    checks.append(Check("identity_spot_value", abs(identity_first(1.0, 4.0) - 0.394), 5e-4))

    box = lambda s: np.where(np.asarray(s) <= 5.0, 1.0, 0.0)  # noqa: E731
    checks.append(Check("fubini_box", fubini_check(box, 10.0, 1e3, breakpoints=(5.0,)).residual, 1e-10))
    plog = Theta0Spec("PowerLog", a=0.5)
    checks.append(Check("fubini_powerlog", fubini_check(plog, 1e2, 1e4).residual, 1e-8))

    checks.append(Check("projection_constant", abs(projection_constant() - 4.0), 1e-8))
    checks.append(Check("mode_moment", abs(mode_moment() - 1.0 / 6.0), 1e-8))
    return checks
