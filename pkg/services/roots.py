"""Grid scan plus bisection, shared by the regime solvers and the walk analytics."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from services.config import SolverConfig
from services.errors import RootSearchError

logger = logging.getLogger(__name__)

# A grid value counts as negative only below this.
SIGN_EPS = 1e-14
TANGENT_TOL = 1e-12
NEAR_CRITICAL_TOL = 1e-10


@dataclass(frozen=True)
class RootSearch:
    root: float | None
    kind: str
    near_critical: bool = False
    argmin: float | None = None
    min_value: float | None = None


def bisect(f, lo, hi, cfg=None):
    cfg = cfg or SolverConfig()
    try:
        return optimize.bisect(f, lo, hi, xtol=cfg.abs_tol, maxiter=cfg.max_iter)
    except (ValueError, RuntimeError) as e:
        raise RootSearchError(f"bisection on [{lo!r}, {hi!r}] failed: {e}") from e


def sign_changes(f, lo, hi, points):
    """Brackets (a, b) of consecutive nonzero-sign grid points where f flips sign."""
    xs = np.linspace(lo, hi, points)
    fs = np.asarray(f(xs), dtype=float)
    sign = np.where(fs < -SIGN_EPS, -1, np.where(fs > SIGN_EPS, 1, 0))
    nz = np.flatnonzero(sign)
    flip = sign[nz[:-1]] != sign[nz[1:]]
    return [(float(xs[a]), float(xs[b])) for a, b in zip(nz[:-1][flip], nz[1:][flip])]


def smallest_root(h, dh, lo, hi, cfg=None):
    """Smallest root of h on [lo, hi] where h(lo) >= 0.

    Sign crossings are found on a ``cfg.bracket_grid`` point grid. Local minima
    of h ahead of the first crossing are located by bisecting ``dh`` so that a
    double root squeezed between two grid points is not missed.
    """
    cfg = cfg or SolverConfig()
    xs = np.linspace(lo, hi, cfg.bracket_grid)
    hs = np.asarray(h(xs), dtype=float)
    negative = np.flatnonzero(hs < -SIGN_EPS)
    first = int(negative[0]) if len(negative) else len(xs)
    if first == 0:
        raise RootSearchError(f"h({lo!r}) = {hs[0]:.3g} < 0: no bracket starts at the lower end")

    best_x, best_h = None, None
    if dh is not None and first > 1:
        ds = np.asarray(dh(xs[:first]), dtype=float)
        dips = np.flatnonzero((ds[:-1] < 0) & (ds[1:] >= 0))
        for j in dips:
            x_star = bisect(dh, xs[j], xs[j + 1], cfg)
            h_star = float(h(x_star))
            if best_h is None or h_star < best_h:
                best_x, best_h = x_star, h_star
            if h_star < -SIGN_EPS:
                root = bisect(h, xs[j], x_star, cfg)
                return RootSearch(root, "crossing", False, x_star, h_star)
            if h_star <= TANGENT_TOL:
                logger.debug("tangent root at x=%.12g (h=%.3g)", x_star, h_star)
                return RootSearch(x_star, "tangent", True, x_star, h_star)

    if first < len(xs):
        if hs[first - 1] <= 0.0:
            root = float(xs[first - 1])
        else:
            root = bisect(h, xs[first - 1], xs[first], cfg)
        return RootSearch(root, "crossing", False, best_x, best_h)

    near = best_h is not None and best_h <= NEAR_CRITICAL_TOL
    if near:
        logger.info("no root, but min h=%.3g at x=%.12g is near-critical", best_h, best_x)
    return RootSearch(None, "none", near, best_x, best_h)
