"""Embedded random walks: hitting probabilities and parity-conditioned quantities."""
import math
import logging
from dataclasses import asdict, dataclass

import numpy as np

from services import analytic, dist
from services.config import SolverConfig
from services.errors import (
    DegenerateParity,
    DegenerateRoots,
    DistributionError,
    MultipleRoots,
    NoNegativeRoot,
    RootSearchError,
)
from services.roots import bisect, sign_changes

logger = logging.getLogger(__name__)

PARITY_GRID = 2048
PARITY_EDGE = 1e-12
ROOT_DELTA = 1e-9
CONVENTIONS = {"StartAt1": 1, "StartAt2": 2}


@dataclass(frozen=True)
class WalkQuantities:
    """Probabilities for a skip-free walk started at 0.

    rho: -1 is ever visited; rho * rho_odd: first visit at an odd time;
    sigma: 0 is never revisited; theta: 0 is revisited before -1;
    theta * theta_odd: that round trip takes an odd number of steps.
    """
    rho: float
    sigma: float
    theta: float
    rho_odd: float
    theta_odd: float
    pi_minus1: float

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TwoBoundarySolution:
    """h(m) = a x1^m + b x2^m: probability that the walk from m ever exits the positive integers."""
    x1: float
    x2: float
    a: float
    b: float
    start: int
    residual: float = 0.0

    def hit(self, m):
        return self.a * self.x1**m + self.b * self.x2**m

    def absorb_minus1(self, m):
        # vanishes at m = 0, equals 1 at m = -1
        if self.x2 == 0.0:
            return 0.0
        return self.x1 * self.x2 * (self.x2**m - self.x1**m) / (self.x1 - self.x2)

    def absorb_zero(self, m):
        return self.hit(m) - self.absorb_minus1(m)

    def alpha(self, start=None):
        """P(exit at -1 | exit) from ``start``."""
        start = self.start if start is None else start
        h = self.hit(start)
        return self.absorb_minus1(start) / h if h > 0.0 else 0.0

    def as_dict(self):
        out = asdict(self)
        out.update(h1=self.hit(1), h2=self.hit(2), alpha1=self.alpha(1), alpha2=self.alpha(2))
        return out


@dataclass(frozen=True)
class SeparableSolution:
    p: float
    p_bar: float
    quantities: WalkQuantities | None = None


@dataclass(frozen=True)
class AlphaVerdict:
    winner: str
    outputs: dict
    targets: dict
    deviations: dict

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class WalkBounds:
    """Brackets from exact enumeration of all paths of a fixed length."""
    steps: int
    rho: tuple
    rho_rho_odd: tuple
    theta: tuple
    theta_theta_odd: tuple
    sigma_upper: float
    rho_tail_completed: float

    def as_dict(self):
        return asdict(self)


def _require_skip_free(inc):
    if inc.shift != -1:
        raise DistributionError("this operation needs a skip-free increment law (shift -1)")


def hitting_rho(inc, cfg=None):
    """Probability that the skip-free walk from 0 ever visits -1."""
    _require_skip_free(inc)
    return analytic.extinction_q(inc.source, cfg)


def conditioned_quantities(inc, cfg=None):
    cfg = cfg or SolverConfig()
    _require_skip_free(inc)
    half = inc.source
    pi = dist.pmf(half, 0)
    if pi <= 0.0:
        raise DistributionError("the walk never moves down (P(step = -1) = 0)")
    if inc.drift <= 0.0:
        raise DistributionError(f"walk drift {inc.drift:.6g} is not positive")

    rho = hitting_rho(inc, cfg)
    sigma = pi * (1.0 - rho) / rho
    theta = 1.0 - pi / rho

    # gamma(z) = -1  <=>  g_X(z) + z = 0 for z in [-rho, 0)
    def f(z):
        return dist.pgf(half, z) + z

    if abs(f(-rho)) <= PARITY_EDGE:
        raise DegenerateParity(f"{dist.describe(half)}: steps have a single parity")
    brackets = sign_changes(f, -rho + PARITY_EDGE, -PARITY_EDGE, PARITY_GRID)
    if len(brackets) > 1:
        raise MultipleRoots(f"gamma(z) = -1 has {len(brackets)} crossings on [-rho, 0)")
    if not brackets:
        raise RootSearchError("gamma(z) = -1 has no crossing on [-rho, 0)")
    z = bisect(f, *brackets[0], cfg)
    rho_odd = 0.5 * (1.0 - z / rho)

    theta_theta_odd = pi * (1.0 - rho_odd) / (rho * (2.0 * rho_odd - 1.0))
    theta_odd = theta_theta_odd / theta if theta > 0.0 else 0.0
    return WalkQuantities(rho, sigma, theta, rho_odd, theta_odd, pi)


def separable_solution(d, cfg=None):
    """Breaker's NoInfo probabilities when xi splits into two i.i.d. halves."""
    cfg = cfg or SolverConfig()
    half = dist.split_half(d)
    if dist.pmf(half, 0) == 0.0:
        return SeparableSolution(0.0, 0.0)
    if dist.mean(d) <= 2.0:
        return SeparableSolution(1.0, 1.0)

    wq = conditioned_quantities(dist.to_increment(half, -1), cfg)
    loop = 1.0 - wq.theta * (1.0 - wq.theta_odd)
    p = wq.rho * (1.0 - wq.sigma * wq.rho_odd / loop)
    p_bar = wq.rho**2 * (1.0 - 2.0 * wq.sigma * wq.rho_odd * (1.0 - wq.rho_odd) / loop)
    return SeparableSolution(p, p_bar, wq)


def _characteristic(d):
    def f(x):
        return dist.pgf(d, x) - x * x
    return f


def positive_root(d, cfg=None):
    """Root of g(x) = x^2 in (0, 1); 0 when no child count below 2 is possible."""
    cfg = cfg or SolverConfig()
    if dist.pmf(d, 0) + dist.pmf(d, 1) == 0.0:
        return 0.0
    if dist.mean(d) <= 2.0:
        raise DistributionError(f"{dist.describe(d)}: mean {dist.mean(d):.6g} <= 2")
    brackets = sign_changes(_characteristic(d), ROOT_DELTA, 1.0 - ROOT_DELTA, cfg.bracket_grid)
    if not brackets:
        raise DegenerateRoots(f"{dist.describe(d)}: root of g(x) = x^2 merges with 1")
    return bisect(_characteristic(d), *brackets[0], cfg)


def two_boundary_hit(d, start=1, cfg=None):
    """Exit probabilities of the walk with steps xi - 2 from the positive integers."""
    cfg = cfg or SolverConfig()
    if start not in (1, 2):
        raise ValueError("start must be 1 or 2")
    f = _characteristic(d)
    x1 = positive_root(d, cfg)
    if x1 == 0.0:
        # xi >= 2 a.s.: the walk never moves down
        return TwoBoundarySolution(0.0, 0.0, 1.0, 0.0, start)

    if dist.pmf(d, 0) == 0.0:
        x2 = 0.0
    else:
        brackets = sign_changes(f, -1.0 + ROOT_DELTA, -ROOT_DELTA, cfg.bracket_grid)
        if not brackets:
            raise NoNegativeRoot(f"{dist.describe(d)}: g(x) = x^2 has no root in (-1, 0)")
        x2 = bisect(f, *brackets[-1], cfg)
    if x1 - x2 <= 1e-10 or x1 >= 1.0 - 1e-10:
        raise DegenerateRoots(f"{dist.describe(d)}: characteristic roots {x1!r}, {x2!r}")

    a = x1 * (x2 - 1.0) / (x2 - x1)
    b = x2 * (1.0 - x1) / (x2 - x1)
    residual = max(abs(f(x1)), abs(f(x2)))
    return TwoBoundarySolution(x1, x2, a, b, start, residual)


def prop_ineq_pbar(d, convention="StartAt1", cfg=None):
    """p_bar from the depth-first decomposition into subtree games, Breaker starting each."""
    cfg = cfg or SolverConfig()
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention '{convention}'")
    p = analytic.solve_empty(d, cfg).p_unconditional
    if dist.pmf(d, 0) == 0.0:
        return dist.pgf(d, p)
    if p >= 1.0:
        return 1.0

    alpha = two_boundary_hit(d, CONVENTIONS[convention], cfg).alpha()
    w = np.asarray(dist.truncate(d).weights)
    k = np.arange(len(w))
    terms = w[1:] * p * (alpha + (1.0 - alpha) * p)**(k[1:] - 1)
    return float(w[0] + terms.sum())


def select_alpha_convention(cfg=None):
    """Pick the start level for alpha that best reproduces the separable p_bar."""
    cfg = cfg or SolverConfig()
    instances = {"poisson:3": dist.poisson(3.0), "geo-n0:0.25": dist.geometric_n0(0.25)}
    targets = {name: separable_solution(d, cfg).p_bar for name, d in instances.items()}

    outputs, deviations = {}, {}
    for convention in CONVENTIONS:
        outputs[convention] = {name: prop_ineq_pbar(d, convention, cfg)
                               for name, d in instances.items()}
        deviations[convention] = math.fsum(abs(outputs[convention][name] - targets[name])
                                           for name in instances)
    winner = min(deviations, key=deviations.get)
    logger.info("alpha convention %s wins (deviations %s)", winner, deviations)
    return AlphaVerdict(winner, outputs, targets, deviations)


def enumerate_walk_bounds(inc, steps=18, cfg=None):
    """Exact path enumeration over ``steps`` steps of a skip-free walk from 0."""
    _require_skip_free(inc)
    w = np.asarray(inc.weights)
    rho = hitting_rho(inc, cfg)

    # first passage to -1; position index i is level i
    alive = np.array([1.0])
    hit = hit_odd = 0.0
    for n in range(1, steps + 1):
        moved = np.convolve(alive, w)
        hit += moved[0]
        if n % 2:
            hit_odd += moved[0]
        alive = moved[1:]
    rest = alive.sum()
    levels = np.arange(len(alive))
    tail_completed = hit + float(np.dot(alive, rho**(levels + 1)))

    # first return to 0 without visiting -1; index i is level i + 1
    back = w[1]
    back_odd = w[1]
    alive = w[2:].copy()
    for n in range(2, steps + 1):
        moved = np.convolve(alive, w)
        back += moved[0]
        if n % 2:
            back_odd += moved[0]
        alive = moved[1:]
    above = alive.sum()

    return WalkBounds(
        steps=steps,
        rho=(hit, hit + rest),
        rho_rho_odd=(hit_odd, hit_odd + rest),
        theta=(back, back + above),
        theta_theta_odd=(back_odd, back_odd + above),
        sigma_upper=above,
        rho_tail_completed=tail_completed,
    )
