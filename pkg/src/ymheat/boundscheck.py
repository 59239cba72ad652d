"""Numerical harness for the weighted heat-convolution bounds.

For a forcing ``v(t) |x|^-b <log|x|>^-a 1_region`` the Duhamel integral is
computed by quadrature (:func:`ymheat.radialheat.duhamel_out`) and divided by
the piecewise bound expression.  "Bounded by an absolute constant" is
checked as: the per-time maximum ratio is finite, shows no systematic trend
along a sweep spanning several decades of ``t``, and changes by less than a
factor 2 across start times ``t0``.

Bracket conventions: ``<x> = sqrt(1 + x^2)`` and ``<log z> = max(1, |log z|)``.
Plain ``log`` factors raised to negative powers are read with the bracket
so that every expression stays finite near ``z = 1``.
"""

from dataclasses import dataclass, field, replace
import json
import math

import numpy as np

from .errors import DomainError
from .grid import write_columns
from .quadrature import integrate
from .radialheat import duhamel_out, heat_evolve

DISPLAYS = ("WithUpperBound", "NoUpperBound", "ThetaEnvelope", "ThetaGradient")
REGIONS = {
    "WithUpperBound": ("inner", "middle", "outer"),
    "NoUpperBound": ("inside", "outside"),
    "ThetaEnvelope": ("inside", "outside"),
    "ThetaGradient": ("inside", "outside"),
}


class BranchSelectionError(DomainError):
    """The parameters do not select a branch of the bound."""


def jbracket(x):
    """``<x> = sqrt(1 + x^2)``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


def logbracket(z):
    """``<log z> = max(1, |log z|)`` for ``z > 0``, and 1 at ``z = 0``.

    Within a factor 2 of ``1 + |log z|`` but free of an additive offset, which
    would otherwise show up as a slowly decaying drift in ratio sweeps.
    """
    z = np.asarray(z, dtype=float)
    lz = np.abs(np.log(np.where(z > 0, z, 1.0)))
    return np.maximum(1.0, lz)


@dataclass(frozen=True)
class PowerLaw:
    """``coef * t^power`` (a time weight ``v`` or a radius ``l_i``)."""

    coef: float = 1.0
    power: float = 0.0

    def __call__(self, t):
        return self.coef * np.asarray(t, dtype=float) ** self.power

    def regularity_constant(self):
        """Smallest ``C_l`` with ``l(s) / l(t)`` in ``[1/C_l, C_l]`` for ``s`` in ``[t/2, t]``."""
        return 2.0 ** abs(self.power)

    def sup(self, lo, hi):
        if self.coef == 0.0:
            return 0.0
        vals = self(np.array([lo, hi]))
        return float(np.max(vals))


@dataclass(frozen=True)
class BoundCase:
    """One instance of a convolution or heat-flow envelope bound.

    ``l1``, ``l2`` bound the support of the forcing (``WithUpperBound``);
    ``v`` is the time weight (ignored by the Theta displays, which use the
    datum ``<r>^-b <log <r>>^-a`` started at heat time 0).
    """

    case_id: str
    display: str
    region: str
    n: int = 6
    b: float = 4.0
    a: float = 0.0
    l1: PowerLaw = PowerLaw(1.0, 0.0)
    l2: PowerLaw = PowerLaw(1.0, 0.5)
    v: PowerLaw = PowerLaw(1.0, -1.0)
    log_shift: float = 0.0  # extra power on the log factors of the bound (mutation hook)

    def __post_init__(self):
        if self.display not in DISPLAYS:
            raise BranchSelectionError(f"unknown display {self.display!r}")
        if self.region not in REGIONS[self.display]:
            raise BranchSelectionError(f"region {self.region!r} not in {REGIONS[self.display]}")
        if self.n < 3 or int(self.n) != self.n:
            raise BranchSelectionError("n must be an integer >= 3")
        if self.b > self.n:
            raise BranchSelectionError("b must be <= n")
        if self.display.startswith("Theta") and self.b >= self.n:
            raise BranchSelectionError("the heat-flow envelopes need b < n")
        if not 0.0 <= self.a < 1.0:
            raise BranchSelectionError("a must lie in [0, 1)")

    def mutated(self, extra=0.5):
        """Same case with the bound's log decay strengthened by ``extra`` (a false bound)."""
        return replace(self, case_id=self.case_id + "-mutant", log_shift=self.log_shift + extra)

    def in_region(self, x, t):
        x = float(x)
        if self.display == "WithUpperBound":
            l1, l2 = float(self.l1(t)), float(self.l2(t))
            return {"inner": x <= l1, "middle": l1 < x <= l2, "outer": x > l2}[self.region]
        return (x <= math.sqrt(t)) if self.region == "inside" else (x > math.sqrt(t))

    def sample_points(self, t, count=5):
        """``count`` log-spaced radii inside the case's region at time ``t``."""
        sq = math.sqrt(t)
        if self.display == "WithUpperBound":
            l1, l2 = float(self.l1(t)), float(self.l2(t))
            if self.region == "inner":
                if l1 == 0.0:
                    return np.array([0.0])
                return np.concatenate([[0.0], np.geomspace(l1 * 1e-2, l1, count - 1)])
            if self.region == "middle":
                lo = l1 if l1 > 0 else l2 * 1e-3
                return np.geomspace(lo, l2, count + 1)[1:]
            return np.geomspace(l2, 4.0 * l2, count + 1)[1:]
        if self.region == "inside":
            return np.concatenate([[0.0], np.geomspace(1e-2 * sq, sq, count - 1)])
        return np.geomspace(sq, 4.0 * sq, count + 1)[1:]

    def to_dict(self):
        return {"case_id": self.case_id, "display": self.display, "region": self.region,
                "n": self.n, "b": self.b, "a": self.a,
                "l1": [self.l1.coef, self.l1.power], "l2": [self.l2.coef, self.l2.power],
                "v": [self.v.coef, self.v.power], "log_shift": self.log_shift}


# -- bound expressions ----------------------------------------------------

def _history(case, t, t0, g, scale=1.0):
    """``scale * int_{t0/2}^{t/2} v(s) g(s) ds`` with ``v = 0`` before ``t0``.

    ``scale`` is applied inside the integrand so that fast-growing ``g``
    does not overflow before a small prefactor brings it back into range.
    """
    lo, hi = max(0.5 * t0, t0), 0.5 * t
    if hi <= lo or case.v.coef == 0.0:
        return 0.0

    def f(u):
        s = np.exp(u)
        return (s * scale) * case.v(s) * g(s)

    return integrate(f, math.log(lo), math.log(hi), 1e-300, 1e-10)[0]


def _sup_v(case, t, t0):
    lo = max(0.5 * t, t0)
    return case.v.sup(lo, t) if t >= t0 else 0.0


READINGS = ("displayed", "spatial-log")


def eval_bound_rhs(case, x, t, t0=0.0, reading="displayed"):
    """Bound expression of ``case`` at ``(x, t)`` (up to the absolute constant).

    ``reading`` only matters for the outer branch of ``NoUpperBound``, whose
    leading term carries ``(log t)^-a``; ``"spatial-log"`` uses
    ``<log |x|>^-a`` there instead, matching the forcing's own log factor.

    Raises
    ------
    BranchSelectionError
        ``x`` lies outside the case's region.
    """
    x = float(x)
    if not t > 0:
        raise DomainError("t must be > 0")
    if reading not in READINGS:
        raise DomainError(f"reading must be one of {READINGS}")
    if not case.in_region(x, t):
        raise BranchSelectionError(f"x = {x:g} is outside region {case.region!r} at t = {t:g}")
    n, b = case.n, case.b
    a = case.a + case.log_shift
    lb = logbracket
    d = case.display

    if d == "ThetaEnvelope":
        if case.region == "inside":
            return float(jbracket(t) ** (-b / 2) * math.log(t + 2.0) ** (-a))
        return float(jbracket(x) ** (-b) * math.log(x + 2.0) ** (-a))
    if d == "ThetaGradient":
        if case.region == "inside":
            return float(jbracket(t) ** (-b / 2) * math.log(t + 2.0) ** (-a) / math.sqrt(t))
        return float(jbracket(x) ** (-b) * math.log(x + 2.0) ** (-a) * x / t)

    if d == "WithUpperBound":
        l1, l2 = float(case.l1(t)), float(case.l2(t))
        if b < n:
            g = lambda s: case.l2(s) ** (n - b) * lb(case.l2(s)) ** (-a)  # noqa: E731
        else:
            g = lambda s: lb(case.l2(s)) ** (1.0 - a)  # noqa: E731
        hist = math.exp(-x * x / (16 * t)) * _history(case, t, t0, g, t ** (-n / 2))
        sv = _sup_v(case, t, t0)
        if case.region == "inner":
            if b < 2:
                local = l2 ** (2 - b) * lb(l2) ** (-a)
            elif b == 2:
                local = lb(l2 / l1) * lb(l1) ** (-a)
            else:
                local = l1 ** (2 - b) * lb(l1) ** (-a)
        elif case.region == "middle":
            if b < 2:
                local = l2 ** (2 - b) * lb(l2) ** (-a)
            elif b == 2:
                local = lb(l2 / x) * lb(x) ** (-a)
            elif b < n:
                local = x ** (2 - b) * lb(x) ** (-a)
            else:
                local = x ** (2 - n) * lb(x / l1) * lb(l1) ** (-a)
        else:
            tail = l2 ** (n - b) * lb(l2) ** (-a) if b < n else lb(l2) ** (1 - a)
            local = x ** (2 - n) * math.exp(-x * x / (16 * t)) * tail
        return float(hist + sv * local)

    # NoUpperBound: forcing supported on |x| >= sqrt(t)
    logt = math.log(t)
    sv = _sup_v(case, t, t0)
    if case.region == "inside":
        if b < n:
            g = lambda s: np.full_like(s, t ** ((n - b) / 2) * logt ** (-a))  # noqa: E731
        else:
            g = lambda s: np.full_like(s, logt ** (1 - a))  # noqa: E731
        return float(_history(case, t, t0, g, t ** (-n / 2)) + t ** (1 - b / 2) * logt ** (-a) * sv)
    hist_v = _history(case, t, t0, lambda s: np.ones_like(s))
    log_factor = logt ** (-a) if reading == "displayed" else lb(x) ** (-a)
    val = x ** (-b) * log_factor * (t * sv + hist_v)
    if b == n:
        val += t ** (-n / 2) * math.exp(-x * x / (16 * t)) * lb(x) ** (1 - a) * hist_v
    return float(val)


# -- numeric left-hand sides ---------------------------------------------

def forcing_for(case):
    """``(f(s, sigma), breakpoints(sigma))`` of a convolution case."""
    n_b, a = case.b, case.a

    if case.display == "WithUpperBound":
        def f(s, sig):
            l1, l2 = case.l1(sig), case.l2(sig)
            inside = (s >= l1) & (s <= l2) & (s > 0)
            ss = np.where(inside, s, 1.0)
            return np.where(inside, case.v(sig) * ss ** (-n_b) * logbracket(ss) ** (-a), 0.0)

        def bps(sig):
            return [np.broadcast_to(case.l1(sig), sig.shape), np.broadcast_to(case.l2(sig), sig.shape)]
    elif case.display == "NoUpperBound":
        def f(s, sig):
            inside = s >= np.sqrt(sig)
            ss = np.where(inside, s, 1.0)
            return np.where(inside, case.v(sig) * ss ** (-n_b) * logbracket(ss) ** (-a), 0.0)

        def bps(sig):
            return [np.sqrt(sig)]
    else:
        raise DomainError("only convolution displays have a forcing")
    return f, bps


def theta_datum(b, a):
    """``<r>^-b <log <r>>^-a``."""
    def f(r):
        jr = jbracket(r)
        return jr ** (-b) * logbracket(jr) ** (-a)
    return f


def eval_lhs_numeric(case, x, t, t0=0.0, epsrel=1e-7, epsabs=None):
    """Numeric value of the bounded quantity at the radii ``x`` (array) and time ``t``.

    Convolution displays return ``|T_n^out[forcing]|``; Theta displays
    return ``|Theta|`` or the centred-difference ``|Theta_r|`` of the free
    heat flow from the datum ``<r>^-b <log <r>>^-a`` (heat time ``t``).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if case.display in ("WithUpperBound", "NoUpperBound"):
        if case.v.coef == 0.0 or t <= t0:
            return np.zeros_like(x)
        f, bps = forcing_for(case)
        if epsabs is None:
            # the bound sets the scale; values far below it do not affect ratios
            epsabs = 1e-9 * min(eval_bound_rhs(case, xv, t, t0) for xv in x)
        return np.abs(duhamel_out(f, t0, t, x, n=case.n, epsabs=epsabs, epsrel=epsrel,
                                  forcing_breakpoints=bps))
    datum = theta_datum(case.b, case.a)
    if epsabs is None:
        epsabs = 1e-12 * min(eval_bound_rhs(case, xv, t) for xv in x)
    if case.display == "ThetaEnvelope":
        return np.abs(heat_evolve(datum, 0.0, t, x, n=case.n, epsabs=epsabs, epsrel=1e-10))
    delta = 1e-3 * np.minimum(np.maximum(x, 1.0), math.sqrt(t))
    pos = x > 0
    out = np.zeros_like(x)
    if pos.any():
        xp, dp = x[pos], delta[pos]
        up = heat_evolve(datum, 0.0, t, xp + dp, n=case.n, epsabs=epsabs * 1e-3, epsrel=1e-12)
        dn = heat_evolve(datum, 0.0, t, np.maximum(xp - dp, 0.0), n=case.n, epsabs=epsabs * 1e-3, epsrel=1e-12)
        out[pos] = np.abs(up - dn) / (xp + dp - np.maximum(xp - dp, 0.0))
    return out


# -- sweeps ---------------------------------------------------------------

@dataclass
class SweepResult:
    case: BoundCase
    rows: list = field(default_factory=list)   # (case_id, t0, t, x, lhs, rhs, ratio)
    per_t0: dict = field(default_factory=dict)  # t0 -> {"times", "kmax", "slope", "max"}
    max_ratio: float = 0.0
    slope: float = 0.0
    stability: float = 1.0
    verdict: str = "PASS"
    # verdict under the other reading of an ambiguous bound, when there is one
    alternative: dict = None

    @property
    def reading_flag(self):
        """True when the two readings of an ambiguous bound disagree."""
        return self.alternative is not None and self.alternative["verdict"] != self.verdict

    def to_dict(self):
        d = {
            "case": self.case.to_dict(), "verdict": self.verdict, "max_ratio": self.max_ratio,
            "slope": self.slope, "t0_stability": self.stability,
            "per_t0": {f"{k:g}": {"max": v["max"], "slope": v["slope"]} for k, v in self.per_t0.items()},
        }
        if self.alternative is not None:
            d["alternative_reading"] = dict(self.alternative)
            d["reading_flag"] = self.reading_flag
        return d

    def write(self, csv_path, json_path=None):
        cols = list(zip(*self.rows)) if self.rows else [[] for _ in range(7)]
        ids = [f"{cid}@t0={t0:g}" for cid, t0 in zip(cols[0], cols[1])]
        write_columns(csv_path, ["case_id", "t", "x", "lhs", "rhs", "ratio"],
                      [ids, cols[2], cols[3], cols[4], cols[5], cols[6]])
        if json_path:
            with open(json_path, "w") as fh:
                json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def trend_slope(times, kmax):
    """Least-squares slope of ``log kmax`` against ``log log t``.

    Log factors are what the bounds track, so drift is measured per
    e-fold of ``log t``; a missing ``(log)^c`` factor shows up as slope ``c``.
    """
    t = np.asarray(times, dtype=float)
    k = np.asarray(kmax, dtype=float)
    keep = k > 0
    if keep.sum() < 2:
        return 0.0
    xx = np.log(np.log(t[keep]))
    yy = np.log(k[keep])
    return float(np.polyfit(xx, yy, 1)[0])


def default_times(t0, samples=20, t_end=1e80, start_factor=10.0):
    """``samples`` log-spaced times from ``start_factor * t0`` to ``t_end``.

    Log corrections converge like ``1 / log t``, so sweeps run far beyond
    the few decades where the forcing is still building up.
    """
    return np.geomspace(start_factor * t0, t_end, samples)


def _summarise(per_t0, slope_tol, stability_tol):
    maxes = [v["max"] for v in per_t0.values()]
    max_ratio = float(max(maxes))
    slope = float(max(v["slope"] for v in per_t0.values()))
    positive = [m for m in maxes if m > 0]
    stability = float(max(positive) / min(positive)) if positive else 1.0
    ok = all(math.isfinite(m) for m in maxes) and slope <= slope_tol and stability < stability_tol
    return {"max_ratio": max_ratio, "slope": slope, "stability": stability,
            "verdict": "PASS" if ok else "FAIL"}


def _ratio(lhs, rhs):
    if lhs == 0.0:
        return 0.0
    return lhs / rhs if rhs > 0 else math.inf


def ratio_sweep(case, t0_values=(1e2, 1e3, 1e4), samples=20, t_end=1e80, points=5,
                slope_tol=0.05, stability_tol=2.0, times=None, epsrel=1e-7):
    """Sweep ``lhs / rhs`` over times and start times.

    For each ``t0`` the sweep runs over ``samples`` log-spaced times from
    ``10 t0`` to ``t_end`` (or the given ``times``), with
    ``points`` radii per time.  PASS iff every ratio is finite, the trend
    slope of the per-time maximum (see :func:`trend_slope`) is at most
    ``slope_tol`` for every ``t0``, and the overall maxima for different
    ``t0`` differ by less than ``stability_tol``.  Zero ``lhs`` with zero
    ``rhs`` counts as ratio 0.

    For the outer branch of ``NoUpperBound`` the same ``lhs`` values are
    also judged against the ``"spatial-log"`` reading of the bound; the
    outcome goes to ``alternative`` and :attr:`SweepResult.reading_flag`
    marks a disagreement.
    """
    res = SweepResult(case)
    ambiguous = case.display == "NoUpperBound" and case.region == "outside"
    alt_per_t0 = {}
    theta = case.display.startswith("Theta")
    t0_list = (0.0,) if theta else tuple(t0_values)
    for t0 in t0_list:
        ts = np.asarray(times, dtype=float) if times is not None else \
            default_times(t0 if t0 > 0 else 10.0, samples, t_end)
        if ts.size < 20:
            raise DomainError("a sweep needs at least 20 samples")
        if np.log10(ts[-1] / ts[0]) < 3.0 - 1e-9:
            raise DomainError("a sweep must span at least 3 decades")
        kmax, kalt = [], []
        for t in ts:
            xs = case.sample_points(t, points)
            lhs = eval_lhs_numeric(case, xs, t, t0, epsrel)
            best = best_alt = 0.0
            for xv, lv in zip(xs, lhs):
                rv = eval_bound_rhs(case, xv, t, t0)
                ratio = _ratio(lv, rv)
                res.rows.append((case.case_id, t0, t, xv, lv, rv, ratio))
                best = max(best, ratio)
                if ambiguous:
                    best_alt = max(best_alt, _ratio(lv, eval_bound_rhs(case, xv, t, t0, "spatial-log")))
            kmax.append(best)
            kalt.append(best_alt)
        for store, k in ((res.per_t0, np.array(kmax)), (alt_per_t0, np.array(kalt))):
            store[t0] = {"times": ts, "kmax": k, "max": float(k.max()), "slope": trend_slope(ts, k)}
    summary = _summarise(res.per_t0, slope_tol, stability_tol)
    res.max_ratio, res.slope = summary["max_ratio"], summary["slope"]
    res.stability, res.verdict = summary["stability"], summary["verdict"]
    if ambiguous:
        res.alternative = {"reading": "spatial-log", **_summarise(alt_per_t0, slope_tol, stability_tol)}
    return res


def envelope_constants(case, times, points=5):
    """Per-time maximum of ``lhs / rhs`` and the worst ratio between ``K(2t)`` and ``K(t)``.

    ``times`` should contain doubling pairs; the factor is computed between
    consecutive entries whose ratio is 2.
    """
    times = np.asarray(times, dtype=float)
    k = []
    for t in times:
        xs = case.sample_points(t, points)
        lhs = eval_lhs_numeric(case, xs, t)
        rhs = np.array([eval_bound_rhs(case, xv, t) for xv in xs])
        k.append(float(np.max(lhs / rhs)))
    k = np.array(k)
    factors = [max(k[i + 1] / k[i], k[i] / k[i + 1]) for i in range(len(k) - 1)
               if abs(times[i + 1] / times[i] - 2.0) < 1e-9]
    return k, (max(factors) if factors else 1.0)


def standard_cases(n=6):
    """The bound cases exercised by the acceptance sweep."""
    sqrt_l = PowerLaw(1.0, 0.5)
    return [
        BoundCase("b4-middle", "WithUpperBound", "middle", n, 4.0, 0.0, PowerLaw(1.0, 0.0), sqrt_l,
                  PowerLaw(1.0, -1.0)),
        BoundCase("b4-middle-log", "WithUpperBound", "middle", n, 4.0, 0.5, PowerLaw(1.0, 0.0), sqrt_l,
                  PowerLaw(1.0, -1.0)),
        BoundCase("b4-inner", "WithUpperBound", "inner", n, 4.0, 0.5, PowerLaw(2.0, 0.0), sqrt_l,
                  PowerLaw(1.0, -1.0)),
        BoundCase("b4-outer", "WithUpperBound", "outer", n, 4.0, 0.5, PowerLaw(1.0, 0.0), sqrt_l,
                  PowerLaw(1.0, -1.0)),
        BoundCase("b0-inner", "WithUpperBound", "inner", n, 0.0, 0.0, PowerLaw(0.0, 0.0), sqrt_l,
                  PowerLaw(1.0, 0.0)),
        BoundCase("b6-noupper-inside", "NoUpperBound", "inside", n, 6.0, 0.5, v=PowerLaw(1.0, 0.0)),
        BoundCase("b4-noupper-outside", "NoUpperBound", "outside", n, 4.0, 0.5, v=PowerLaw(1.0, 0.0)),
    ]


def mutation_case():
    """The false bound used to check that sweeps can fail."""
    return standard_cases()[1].mutated(0.5)


def theta_cases(a_values=(0.0, 0.5), n=6):
    cases = []
    for a in a_values:
        for disp, tag in (("ThetaEnvelope", "theta"), ("ThetaGradient", "theta-r")):
            for region in ("inside", "outside"):
                cases.append(BoundCase(f"{tag}-{region}-a{a:g}", disp, region, n, 2.0, a))
    return cases


def doubling_times(t_lo=1e2, t_hi=1e6):
    """``t_lo * 2^k`` up to ``t_hi``."""
    count = int(math.floor(math.log2(t_hi / t_lo) + 1e-9)) + 1
    return t_lo * 2.0 ** np.arange(count)


def envelope_check(case, t_lo=1e2, t_hi=1e6, doubling_tol=1.05, spread_tol=2.0, points=5):
    """Doubling-stability verdict for an envelope constant.

    PASS iff every ``K(2t) / K(t)`` (either way round) stays below
    ``doubling_tol`` and ``max K / min K`` over the whole range stays below
    ``spread_tol``.
    """
    times = doubling_times(t_lo, t_hi)
    k, factor = envelope_constants(case, times, points)
    spread = float(k.max() / k.min()) if k.min() > 0 else math.inf
    ok = bool(np.all(np.isfinite(k)) and factor < doubling_tol and spread < spread_tol)
    return {"case_id": case.case_id, "verdict": "PASS" if ok else "FAIL",
            "doubling_factor": float(factor), "spread": spread,
            "constants": [float(v) for v in k], "times": [float(v) for v in times]}
