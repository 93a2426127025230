"""Breaker's winning probabilities from the fixed-point equations of each regime.

FullInfo:  p = g(p) + (1-p) g'(p), smallest root, p_bar = g(p).
NoInfo:    g(x) = x^2 when p_0 = 0; walk analysis (separable split or the
           two-root solution of the embedded walk) when p_0 > 0.
SizeInfo:  (1-q) x^2 = g(x(1-q) + q) - q for the survival-conditioned root.
"""
import math
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from services import dist, walk
from services.config import REGIMES, GameConfig, SolverConfig
from services.errors import (
    BoundsContradiction,
    DistributionError,
    NoTransitionInBracket,
    NotSeparable,
    RootSearchError,
)
from services.roots import bisect, smallest_root

logger = logging.getLogger(__name__)

CASES = ("Trivial0", "Trivial1", "Interior")
INTERIOR_DELTA = 1e-9
PARAM_TOL = 1e-9
DEKKING_GRID = 100_000
FALLBACK_TRIALS = 200_000


@dataclass(frozen=True)
class RegimeSolution:
    regime: str
    p_conditional: float
    p_unconditional: float
    p_bar: float
    case: str
    residual: float
    q: float = 0.0
    note: str = ""

    @property
    def p(self):
        return self.p_unconditional

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BoundsReport:
    """Sufficient conditions for either side, or a coupling sandwich.

    ``maker_has_chance``/``breaker_sure`` are "Yes", "No" or "Inconclusive".
    A "Yes" on one side forces "No" on the other.
    """
    maker_has_chance: str = "Inconclusive"
    breaker_sure: str = "Inconclusive"
    inequalities: dict = field(default_factory=dict)
    p_interval: tuple | None = None
    p_bar_interval: tuple | None = None
    neighbours: tuple = ()
    bracket: tuple | None = None

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CriticalPoint:
    family: str
    regime: str
    param_c: float
    p_at_critical: float
    solution: RegimeSolution

    def as_dict(self):
        out = {"family": self.family, "regime": self.regime,
               "param_c": self.param_c, "p_at_critical": self.p_at_critical}
        out.update({f"solution_{k}": v for k, v in self.solution.as_dict().items()})
        return out


def regime_name(regime):
    """'full' | 'FullInfo' -> 'FullInfo'."""
    if regime in REGIMES:
        return REGIMES[regime]
    if regime in REGIMES.values():
        return regime
    raise ValueError(f"unknown regime '{regime}'")


def _trivial(regime, value, q, note=""):
    case = "Trivial1" if value == 1.0 else "Trivial0"
    return RegimeSolution(regime, value, value, value, case, 0.0, q, note)


def extinction_q(d, cfg=None):
    """Smallest root of g(x) = x in [0, 1]."""
    cfg = cfg or SolverConfig()
    if dist.pmf(d, 0) == 0.0:
        return 0.0
    if dist.mean(d) <= 1.0:
        return 1.0

    x = 0.0
    for _ in range(cfg.max_iter):
        nxt = dist.pgf(d, x)
        if abs(nxt - x) < cfg.abs_tol:
            x = nxt
            break
        x = nxt

    def excess(y):
        return dist.pgf(d, y) - y

    if excess(x) == 0.0:
        return x
    # g(x) - x is convex with its minimum where g' = 1; q is the only root left of it.
    x_min = bisect(lambda y: dist.pgf(d, y, 1) - 1.0, 0.0, 1.0, cfg)
    lo = x if 0.0 < excess(x) and x < x_min else 0.0
    return bisect(excess, lo, x_min, cfg)


def _full_h(d, x):
    return dist.pgf(d, x) + (1.0 - x) * dist.pgf(d, x, 1) - x


def _full_dh(d, x):
    return (1.0 - x) * dist.pgf(d, x, 2) - 1.0


def solve_full_info(d, cfg=None):
    cfg = cfg or SolverConfig()
    q = extinction_q(d, cfg)
    if dist.pmf(d, 0) + dist.pmf(d, 1) == 0.0:
        logger.debug("%s: every node has two children or more, Maker wins", dist.describe(d))
        return _trivial("FullInfo", 0.0, q)
    if q >= 1.0:
        return _trivial("FullInfo", 1.0, q)

    search = smallest_root(lambda x: _full_h(d, x), lambda x: _full_dh(d, x), 0.0, 1.0, cfg)
    if search.root is None:
        return _trivial("FullInfo", 1.0, q, "near-critical" if search.near_critical else "")

    p = search.root
    note = "near-critical" if search.kind == "tangent" else ""
    return RegimeSolution("FullInfo", p, p, dist.pgf(d, p), "Interior",
                          abs(_full_h(d, p)), q, note)


def _no_info_interior(d, cfg, q):
    def h(x):
        return dist.pgf(d, x) - x * x

    def dh(x):
        return dist.pgf(d, x, 1) - 2.0 * x

    search = smallest_root(h, dh, INTERIOR_DELTA, 1.0 - INTERIOR_DELTA, cfg)
    if search.root is None:
        logger.warning("%s: no interior root of g(x) = x^2 found, reporting p = 1",
                       dist.describe(d))
        return _trivial("NoInfo", 1.0, q, "near-critical" if search.near_critical else "")
    p = search.root
    return RegimeSolution("NoInfo", p, p, p * p, "Interior", abs(h(p)), q)


def _simulated_no_info(d, q):
    from services import sim

    logger.warning("%s: falling back to walk simulation", dist.describe(d))
    inc = dist.to_increment(d, -2)
    game_cfg = GameConfig(trials=FALLBACK_TRIALS, master_seed=0)
    first = sim.simulate_walk_hit(inc, 1, game_cfg)
    second = sim.simulate_walk_hit(inc, 2, game_cfg)
    half_width = 0.5 * (first.ci_hi - first.ci_lo)
    return RegimeSolution("NoInfo", first.p_hat, first.p_hat, second.p_hat, "Interior",
                          half_width, q, "simulated")


def solve_empty(d, cfg=None):
    """NoInfo regime: nothing is revealed about a node when it becomes visible."""
    cfg = cfg or SolverConfig()
    p0, p1, mu = dist.pmf(d, 0), dist.pmf(d, 1), dist.mean(d)
    q = extinction_q(d, cfg)

    if p0 == 0.0:
        if p1 == 0.0:
            return _trivial("NoInfo", 0.0, q)
        if mu <= 2.0:
            return _trivial("NoInfo", 1.0, q)
        return _no_info_interior(d, cfg, q)

    if mu <= 2.0:
        return _trivial("NoInfo", 1.0, q)

    separable = None
    try:
        separable = walk.separable_solution(d, cfg)
    except NotSeparable as e:
        logger.debug("%s", e)
    except RootSearchError as e:
        logger.warning("separable analysis of %s failed: %s", dist.describe(d), e)

    two_root = None
    try:
        two_root = walk.two_boundary_hit(d, 1, cfg)
    except RootSearchError as e:
        logger.warning("two-root analysis of %s failed: %s", dist.describe(d), e)

    if separable is not None:
        residual = abs(separable.p - two_root.hit(1)) if two_root is not None else 0.0
        return RegimeSolution("NoInfo", separable.p, separable.p, separable.p_bar,
                              "Interior", residual, q, "separable")
    if two_root is not None:
        p = two_root.hit(1)
        return RegimeSolution("NoInfo", p, p, two_root.hit(2), "Interior",
                              two_root.residual, q, "two-boundary")
    return _simulated_no_info(d, q)


def solve_size_info(d, cfg=None):
    """SizeInfo regime: each visible node shows whether its subtree is finite."""
    cfg = cfg or SolverConfig()
    p0, p1, mu = dist.pmf(d, 0), dist.pmf(d, 1), dist.mean(d)

    if p0 == 0.0:
        return replace(solve_empty(d, cfg), regime="SizeInfo")

    q = extinction_q(d, cfg)
    if mu <= 2.0:
        return _trivial("SizeInfo", 1.0, q)

    b = 1.0 - q
    g_q = dist.pgf(d, q)

    # g(q) in place of q keeps h(0) = 0 whatever the residual of q
    def h(x):
        return dist.pgf(d, x * b + q) - g_q - b * x * x

    def dh(x):
        return b * (dist.pgf(d, x * b + q, 1) - 2.0 * x)

    search = smallest_root(h, dh, INTERIOR_DELTA, 1.0 - INTERIOR_DELTA, cfg)
    if search.root is None:
        logger.warning("%s: no interior SizeInfo root, reporting p = 1", dist.describe(d))
        return _trivial("SizeInfo", 1.0, q, "near-critical" if search.near_critical else "")

    p_c = search.root
    p_u = q + b * p_c
    return RegimeSolution("SizeInfo", p_c, p_u, dist.pgf(d, p_u), "Interior",
                          abs(h(p_c)), q)


_SOLVERS = {
    "FullInfo": solve_full_info,
    "NoInfo": solve_empty,
    "SizeInfo": solve_size_info,
}


def solve(d, regime, cfg=None):
    return _SOLVERS[regime_name(regime)](d, cfg or SolverConfig())


def _tangency(d, p, cfg):
    """Local minimum of the FullInfo h right of its first root."""
    xs = np.linspace(p, 1.0, cfg.bracket_grid)
    ds = _full_dh(d, xs)
    ahead = np.flatnonzero(ds >= 0.0)
    if not len(ahead) or ahead[0] == 0:
        return p
    j = ahead[0]
    return bisect(lambda x: _full_dh(d, x), xs[j - 1], xs[j], cfg)


def critical_parameter(family, bracket, regime="full", cfg=None, fixed=None):
    """Parameter where the regime equation first gets an interior root."""
    cfg = cfg or SolverConfig()
    regime = regime_name(regime)
    lo, hi = bracket

    def evaluate(value):
        sol = solve(dist.family_member(family, value, fixed), regime, cfg)
        return sol.case != "Trivial1", sol

    comp_lo, sol_lo = evaluate(lo)
    comp_hi, sol_hi = evaluate(hi)
    if comp_lo == comp_hi:
        raise NoTransitionInBracket(
            f"{family} in [{lo}, {hi}] is {'competitive' if comp_lo else 'trivial'} at both ends")

    if comp_lo:
        comp_x, comp_sol, trivial_x = lo, sol_lo, hi
    else:
        comp_x, comp_sol, trivial_x = hi, sol_hi, lo
    while abs(comp_x - trivial_x) > PARAM_TOL:
        mid = 0.5 * (comp_x + trivial_x)
        competitive, sol = evaluate(mid)
        if competitive:
            comp_x, comp_sol = mid, sol
        else:
            trivial_x = mid

    p_c = comp_sol.p_unconditional
    if regime == "FullInfo" and comp_sol.case == "Interior":
        p_c = _tangency(dist.family_member(family, comp_x, fixed), p_c, cfg)
    logger.info("%s critical parameter %.12g (p=%.12g)", family, comp_x, p_c)
    return CriticalPoint(family, regime, comp_x, p_c, comp_sol)


def _maker_condition(d):
    """E[1/(xi+1)] against 1/4 + p_0/2 + (p_0+p_1)^2/4."""
    p0, p1 = dist.pmf(d, 0), dist.pmf(d, 1)
    lhs = dist.expected_inverse(d)
    rhs = 0.25 + 0.5 * p0 + 0.25 * (p0 + p1)**2
    return lhs, rhs


def _breaker_condition(d):
    """max over [0, 1) of (1-x) g''(x); Breaker is sure to win when it stays below 1."""
    xs = np.linspace(0.0, 1.0, DEKKING_GRID + 1)[:-1]
    return float(np.max((1.0 - xs) * dist.pgf(d, xs, 2)))


def binomial_dekking_bracket(n, cfg=None):
    """(r_lo, r_hi) with r_lo <= r_c <= r_hi for Bin(n, r) under full information."""
    cfg = cfg or SolverConfig()
    if n < 3:
        raise DistributionError("the Binomial bracket needs n >= 3")
    r_lo = ((n - 1) / (n - 2))**(n - 2) / n

    def margin(r):
        lhs, rhs = _maker_condition(dist.binomial(n, r))
        return rhs - lhs

    if margin(1.0) <= 0.0:
        r_hi = 1.0
    else:
        r_hi = bisect(margin, r_lo, 1.0, cfg)
    return r_lo, r_hi


def dekking_bounds(d, cfg=None):
    cfg = cfg or SolverConfig()
    lhs_a, rhs_a = _maker_condition(d)
    lhs_b = _breaker_condition(d)
    maker = lhs_a <= rhs_a
    breaker = lhs_b < 1.0
    if maker and breaker:
        raise BoundsContradiction(
            f"{dist.describe(d)}: both sufficient conditions hold (a: {lhs_a:.12g} <= {rhs_a:.12g}, "
            f"b: {lhs_b:.12g} < 1)")

    bracket = None
    if d.kind == "binomial" and d.n >= 3:
        bracket = binomial_dekking_bracket(d.n, cfg)
    return BoundsReport(
        maker_has_chance="Yes" if maker else ("No" if breaker else "Inconclusive"),
        breaker_sure="Yes" if breaker else ("No" if maker else "Inconclusive"),
        inequalities={
            "expected_inverse": {"lhs": lhs_a, "rhs": rhs_a},
            "second_derivative": {"lhs": lhs_b, "rhs": 1.0},
        },
        bracket=bracket,
    )


def bound_threshold(family, condition, bracket, cfg=None, fixed=None):
    """Parameter where the Maker ('maker') or Breaker ('breaker') condition flips."""
    cfg = cfg or SolverConfig()
    if condition not in ("maker", "breaker"):
        raise ValueError("condition must be 'maker' or 'breaker'")

    def margin(value):
        d = dist.family_member(family, value, fixed)
        if condition == "maker":
            lhs, rhs = _maker_condition(d)
            return rhs - lhs
        return 1.0 - _breaker_condition(d)

    lo, hi = bracket
    if margin(lo) * margin(hi) > 0.0:
        raise NoTransitionInBracket(f"{condition} condition does not flip on [{lo}, {hi}]")
    return bisect(margin, lo, hi, cfg)


def bounds_by_coupling(d, regime="none", cfg=None):
    """Sandwich Bin(n, r), n odd, between the separable Bin(n-1, r) and Bin(n+1, r)."""
    cfg = cfg or SolverConfig()
    if d.kind != "binomial" or d.n < 3 or d.n % 2 == 0:
        raise DistributionError("coupling bounds need a Binomial law with odd n >= 3")

    larger = dist.binomial(d.n + 1, d.r)
    smaller = dist.binomial(d.n - 1, d.r)
    lower = solve(larger, regime, cfg)
    upper = solve(smaller, regime, cfg)
    return BoundsReport(
        maker_has_chance="Yes" if upper.p_unconditional < 1.0 else "Inconclusive",
        breaker_sure="Yes" if lower.p_unconditional >= 1.0 else "Inconclusive",
        p_interval=(lower.p_unconditional, upper.p_unconditional),
        p_bar_interval=(lower.p_bar, upper.p_bar),
        neighbours=(dist.describe(larger), dist.describe(smaller)),
    )


def full_info_closed_form(d):
    """(p, p_bar) for the geometric laws."""
    s = d.s
    if d.kind == "geo-n":
        if s > 0.25:
            return 1.0, 1.0
        p = (1.0 - math.sqrt(1.0 - 4.0 * s)) / (2.0 * (1.0 - s))
    elif d.kind == "geo-n0":
        if s > 0.2:
            return 1.0, 1.0
        p = (1.0 + s - math.sqrt((1.0 - s) * (1.0 - 5.0 * s))) / (2.0 * (1.0 - s))
    else:
        raise DistributionError(f"no FullInfo closed form for {dist.describe(d)}")
    return p, p - s / (1.0 - s)


def no_info_closed_form(d):
    """(p, p_bar) for GeometricN, laws on {1,2,3} and OneOrMany with n = 4."""
    if d.kind == "geo-n":
        if d.s >= 0.5:
            return 1.0, 1.0
        p = d.s / (1.0 - d.s)
    elif d.kind == "one-or-many" and d.n == 4:
        if d.r <= 1.0 / 3.0:
            return 1.0, 1.0
        p = (math.sqrt(d.r * (4.0 - 3.0 * d.r)) - d.r) / (2.0 * d.r)
    elif d.is_finite and len(dist.support_weights(d)) <= 4 and dist.pmf(d, 0) == 0.0:
        p1, p3 = dist.pmf(d, 1), dist.pmf(d, 3)
        if p1 >= p3:
            return 1.0, 1.0
        p = p1 / p3
    else:
        raise DistributionError(f"no NoInfo closed form for {dist.describe(d)}")
    return p, p * p


def size_info_closed_form(d, cfg=None):
    """(p_conditional, p_unconditional, p_bar) for laws on {0,1,2,3}."""
    if not d.is_finite or len(dist.support_weights(d)) > 4:
        raise DistributionError(f"no SizeInfo closed form for {dist.describe(d)}")
    q = extinction_q(d, cfg)
    if dist.pmf(d, 0) + dist.pmf(d, 1) == 0.0:
        return 0.0, 0.0, 0.0
    p3 = dist.pmf(d, 3)
    slope = dist.pgf(d, q, 1)
    if slope >= p3 * (1.0 - q)**2:
        return 1.0, 1.0, 1.0
    p_c = slope / (p3 * (1.0 - q)**2)
    p_u = q + (1.0 - q) * p_c
    return p_c, p_u, dist.pgf(d, p_u)
