"""Offspring distributions and the walk increments derived from them."""
import math
import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, stats

from services.config import TAIL_EPS
from services.errors import DistributionError, NotSeparable

logger = logging.getLogger(__name__)

KINDS = ("geo-n", "geo-n0", "poisson", "binomial", "nb", "one-or-many", "none-or-many", "pmf")
FINITE_KINDS = ("binomial", "one-or-many", "none-or-many", "pmf")

# Scanned parameter and the fixed ones for every one-parameter family.
FAMILIES = {
    "geo-n": {"scan": "s", "fixed": ()},
    "geo-n0": {"scan": "s", "fixed": ()},
    "poisson": {"scan": "lam", "fixed": ()},
    "binomial": {"scan": "r", "fixed": ("n",)},
    "nb": {"scan": "s", "fixed": ("r",)},
    "one-or-many": {"scan": "r", "fixed": ("n",)},
    "none-or-many": {"scan": "r", "fixed": ("n",)},
}

PROVENANCES = ("offspring-minus-2", "half-minus-1", "skewed-minus-2")


@dataclass(frozen=True)
class OffspringDistribution:
    """Law of the number of children per node.

    Only the fields used by ``kind`` are set: ``s`` for the geometric laws and
    the success probability of ``nb``; ``lam`` for Poisson; ``n``/``r`` for
    Binomial, one-or-many and none-or-many (``r`` is the shape of ``nb``);
    ``weights``/``tail`` for a finite pmf.
    """
    kind: str
    s: float | None = None
    lam: float | None = None
    n: int | None = None
    r: float | None = None
    weights: tuple = ()
    tail: float = 0.0

    def __post_init__(self):
        if self.kind == "pmf":
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        _validate(self)

    @property
    def is_finite(self):
        return self.kind in FINITE_KINDS

    def __str__(self):
        return describe(self)


@dataclass(frozen=True)
class IncrementDistribution:
    """Step law of an embedded walk: offspring law shifted by ``shift``."""
    source: OffspringDistribution
    shift: int
    provenance: str
    weights: tuple
    tail: float = 0.0

    def __post_init__(self):
        if self.shift not in (-1, -2):
            raise DistributionError("increment shift must be -1 or -2")
        if self.provenance not in PROVENANCES:
            raise DistributionError(f"unknown provenance '{self.provenance}'")
        mass = math.fsum(self.weights) + self.tail
        if abs(mass - 1.0) > 1e-12:
            raise DistributionError(f"increment mass {mass!r} is not 1")

    @property
    def k_min(self):
        return self.shift

    @property
    def drift(self):
        return mean(self.source) + self.shift


@dataclass(frozen=True)
class AliasTable:
    """Vose alias table for O(1) draws from a finite pmf."""
    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def from_weights(cls, weights):
        w = np.asarray(weights, dtype=float)
        size = len(w)
        scaled = w * size / w.sum()
        prob = np.ones(size)
        alias = np.arange(size)

        small = [i for i in range(size) if scaled[i] < 1.0]
        large = [i for i in range(size) if scaled[i] >= 1.0]
        while small and large:
            lo = small.pop()
            hi = large.pop()
            prob[lo] = scaled[lo]
            alias[lo] = hi
            scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
            if scaled[hi] < 1.0:
                small.append(hi)
            else:
                large.append(hi)
        # Whatever is left over is 1 up to round-off and keeps prob 1.
        return cls(prob, alias)

    def draw(self, rng, size=None):
        idx = rng.integers(len(self.prob), size=size)
        keep = rng.random(size) < self.prob[idx]
        return np.where(keep, idx, self.alias[idx])


def _check_unit(name, value, lo_open, hi_closed=True, lo=0.0, hi=1.0):
    if value is None or not math.isfinite(value):
        raise DistributionError(f"{name} must be a finite number")
    lo_ok = value > lo if lo_open else value >= lo
    hi_ok = value <= hi if hi_closed else value < hi
    if not (lo_ok and hi_ok):
        raise DistributionError(f"{name}={value} outside its admissible range")


def _check_count(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise DistributionError(f"{name} must be an integer >= {minimum}, got {value!r}")


def _validate(d):
    kind = d.kind
    if kind not in KINDS:
        raise DistributionError(f"unknown distribution kind '{kind}'")
    if kind in ("geo-n", "geo-n0"):
        _check_unit("s", d.s, lo_open=True)
    elif kind == "poisson":
        if d.lam is None or not math.isfinite(d.lam) or d.lam <= 0:
            raise DistributionError("Poisson rate must be positive")
    elif kind == "binomial":
        _check_count("n", d.n, 0)
        _check_unit("r", d.r, lo_open=False)
    elif kind == "nb":
        if d.r is None or not math.isfinite(d.r) or d.r <= 0:
            raise DistributionError("negative binomial shape r must be positive")
        _check_unit("s", d.s, lo_open=True, hi_closed=False)
    elif kind in ("one-or-many", "none-or-many"):
        _check_count("n", d.n, 2)
        _check_unit("r", d.r, lo_open=True, hi_closed=False)
    else:
        if not d.weights:
            raise DistributionError("pmf needs at least one weight")
        if any(not math.isfinite(w) or w < 0 for w in d.weights):
            raise DistributionError("pmf weights must be finite and nonnegative")
        if not any(w > 0 for w in d.weights):
            raise DistributionError("pmf needs a strictly positive weight")
        if d.tail < 0:
            raise DistributionError("tail mass must be nonnegative")
        mass = math.fsum(d.weights) + d.tail
        if abs(mass - 1.0) > 1e-12:
            raise DistributionError(f"pmf total mass {mass!r} differs from 1")


def geometric_n(s):
    return OffspringDistribution("geo-n", s=float(s))


def geometric_n0(s):
    return OffspringDistribution("geo-n0", s=float(s))


def poisson(lam):
    return OffspringDistribution("poisson", lam=float(lam))


def binomial(n, r):
    return OffspringDistribution("binomial", n=int(n), r=float(r))


def neg_binomial(r, s):
    return OffspringDistribution("nb", r=float(r), s=float(s))


def one_or_many(n, r):
    return OffspringDistribution("one-or-many", n=int(n), r=float(r))


def none_or_many(n, r):
    return OffspringDistribution("none-or-many", n=int(n), r=float(r))


def finite_pmf(weights, tail=0.0):
    return OffspringDistribution("pmf", weights=tuple(float(w) for w in weights), tail=float(tail))


def _frozen(d):
    if d.kind == "geo-n":
        return stats.geom(d.s)
    if d.kind == "geo-n0":
        return stats.geom(d.s, loc=-1)
    if d.kind == "poisson":
        return stats.poisson(d.lam)
    if d.kind == "nb":
        return stats.nbinom(d.r, d.s)
    if d.kind == "binomial":
        return stats.binom(d.n, d.r)
    raise DistributionError(f"no scipy law for kind '{d.kind}'")


def support_weights(d):
    """pmf vector p_0..p_K of a finitely supported law."""
    if d.kind == "pmf":
        return np.asarray(d.weights, dtype=float)
    if d.kind == "binomial":
        return stats.binom.pmf(np.arange(d.n + 1), d.n, d.r)
    if d.kind in ("one-or-many", "none-or-many"):
        w = np.zeros(d.n + 1)
        w[1 if d.kind == "one-or-many" else 0] = 1.0 - d.r
        w[d.n] = d.r
        return w
    raise DistributionError(f"{describe(d)} has infinite support; truncate it first")


def pmf(d, k):
    if k < 0:
        return 0.0
    if d.is_finite:
        w = support_weights(d)
        return float(w[k]) if k < len(w) else 0.0
    return float(_frozen(d).pmf(k))


def pgf(d, x, order=0):
    """g(x), g'(x) or g''(x); closed forms wherever the law has one."""
    if order not in (0, 1, 2):
        raise ValueError("pgf order must be 0, 1 or 2")
    xs = np.asarray(x, dtype=float)
    if d.kind != "pmf" and np.any(np.abs(xs) > 1.0 + 1e-12):
        raise DistributionError(f"pgf of {describe(d)} evaluated outside [-1, 1]")

    kind = d.kind
    if kind == "geo-n":
        a = 1.0 - d.s
        den = 1.0 - a * xs
        if order == 0:
            val = d.s * xs / den
        elif order == 1:
            val = d.s / den**2
        else:
            val = 2.0 * d.s * a / den**3
    elif kind in ("geo-n0", "nb"):
        shape = 1.0 if kind == "geo-n0" else d.r
        a = 1.0 - d.s
        den = 1.0 - a * xs
        g = (d.s / den)**shape
        if order == 0:
            val = g
        elif order == 1:
            val = shape * a * g / den
        else:
            val = shape * (shape + 1.0) * a * a * g / den**2
    elif kind == "poisson":
        val = d.lam**order * np.exp(d.lam * (xs - 1.0))
    elif kind == "binomial":
        if d.n < order:
            val = np.zeros_like(xs)
        else:
            val = math.perm(d.n, order) * d.r**order * (1.0 - d.r + d.r * xs)**(d.n - order)
    else:
        coef = support_weights(d)
        if order:
            coef = P.polyder(coef, order)
        val = P.polyval(xs, coef)
    return float(val) if np.ndim(val) == 0 else val


def mean(d):
    if d.kind == "geo-n":
        return 1.0 / d.s
    if d.kind == "geo-n0":
        return (1.0 - d.s) / d.s
    if d.kind == "nb":
        return d.r * (1.0 - d.s) / d.s
    if d.kind == "poisson":
        return d.lam
    if d.kind == "binomial":
        return d.n * d.r
    w = support_weights(d)
    return float(np.dot(np.arange(len(w)), w))


def _tail(d, k):
    """P(xi > k)."""
    if d.kind == "geo-n":
        return (1.0 - d.s)**k
    if d.kind == "geo-n0":
        return (1.0 - d.s)**(k + 1)
    return float(_frozen(d).sf(k))


def truncate(d, eps=TAIL_EPS):
    """Finite pmf on 0..K with K the smallest index whose upper tail is below eps."""
    if not 0 < eps <= 1e-6:
        raise ValueError("truncation level must lie in (0, 1e-6]")
    if d.kind == "pmf":
        return d
    if d.is_finite:
        return finite_pmf(support_weights(d))

    hi = max(1, int(math.ceil(mean(d))))
    while _tail(d, hi) >= eps:
        hi *= 2
    lo = -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _tail(d, mid) < eps:
            hi = mid
        else:
            lo = mid
    weights = _frozen(d).pmf(np.arange(hi + 1))
    return finite_pmf(weights, tail=_tail(d, hi))


def sample(d, rng, size=None):
    if d.kind in ("geo-n", "geo-n0", "poisson", "nb", "binomial"):
        out = _frozen(d).rvs(size=size, random_state=rng)
    else:
        out = AliasTable.from_weights(support_weights(d)).draw(rng, size)
    if size is None:
        return int(out)
    return np.asarray(out, dtype=np.int64)


def skew(d, q):
    """Law of the number of children with infinite line of descent, given at least one."""
    if not 0.0 <= q < 1.0:
        raise DistributionError("skew needs q in [0, 1)")
    base = truncate(d)
    w = np.asarray(base.weights)
    idx = np.arange(len(w))
    # thin[k, n] = P(k of n children survive)
    thin = stats.binom.pmf(idx[:, None], idx[None, :], 1.0 - q)
    raw = thin @ w / (1.0 - q)
    raw[0] = 0.0

    mass = raw.sum()
    if abs(mass - 1.0) > 1e-9:
        logger.debug("skew(%s, q=%.6g): mass %.12g renormalized", describe(d), q, mass)
    return finite_pmf(raw / mass)


def _polynomial_square_root(weights):
    w = np.asarray(weights, dtype=float)
    support = np.flatnonzero(w > 0)
    low, high = int(support[0]), int(support[-1])
    if low % 2 or (high - low) % 2:
        raise NotSeparable("pgf is not the square of a polynomial (odd degree span)")

    a = w[low:high + 1]
    half = (high - low) // 2
    b = np.zeros(half + 1)
    b[0] = math.sqrt(a[0])
    for k in range(1, half + 1):
        b[k] = (a[k] - np.dot(b[1:k], b[k - 1:0:-1])) / (2.0 * b[0])

    if np.any(b < -1e-12):
        raise NotSeparable("square-root series has a negative coefficient")
    b = np.clip(b, 0.0, None)
    if np.max(np.abs(np.convolve(b, b) - a)) > 1e-10:
        raise NotSeparable("square-root series does not terminate")

    out = np.concatenate([np.zeros(low // 2), b])
    return finite_pmf(out / out.sum())


def split_half(d):
    """X with X * X = d in law."""
    if d.kind == "poisson":
        return poisson(d.lam / 2.0)
    if d.kind == "nb":
        return neg_binomial(d.r / 2.0, d.s)
    if d.kind == "geo-n0":
        if d.s == 1.0:
            return finite_pmf([1.0])
        return neg_binomial(0.5, d.s)
    if d.kind == "binomial":
        if d.n % 2:
            raise NotSeparable(f"{describe(d)}: binomial with odd n is not a self-convolution")
        return binomial(d.n // 2, d.r)
    if d.kind == "geo-n":
        raise NotSeparable(f"{describe(d)}: lowest support point 1 is odd")
    return _polynomial_square_root(support_weights(d))


def to_increment(d, shift, provenance=None):
    if provenance is None:
        provenance = "half-minus-1" if shift == -1 else "offspring-minus-2"
    base = truncate(d)
    return IncrementDistribution(source=d, shift=shift, provenance=provenance,
                                 weights=base.weights, tail=base.tail)


def increment_pmf(inc, k):
    j = k - inc.shift
    if j < 0 or j >= len(inc.weights):
        return 0.0
    return inc.weights[j]


def gamma(inc, x):
    """Laurent pgf E(x^step) = g(x) / x^|shift| of an increment law."""
    if np.any(np.asarray(x) == 0):
        raise DistributionError("gamma is undefined at x = 0")
    return pgf(inc.source, x) / np.asarray(x, dtype=float)**(-inc.shift)


def expected_inverse(d):
    """E[1/(xi+1)], which equals the integral of g over [0, 1]."""
    if d.kind == "geo-n":
        a = 1.0 - d.s
        if a < 1e-3:
            return integrate.quad(lambda x: pgf(d, x), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)[0]
        return d.s * (-1.0 / a - math.log(d.s) / a**2)
    if d.kind == "geo-n0":
        if d.s == 1.0:
            return 1.0
        return -d.s * math.log(d.s) / (1.0 - d.s)
    if d.kind == "poisson":
        return -math.expm1(-d.lam) / d.lam
    if d.kind == "binomial":
        if d.r == 0.0:
            return 1.0
        return (1.0 - (1.0 - d.r)**(d.n + 1)) / (d.r * (d.n + 1))
    return integrate.quad(lambda x: pgf(d, x), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)[0]


def _fmt(value):
    return format(value, ".12g")


def describe(d):
    """CLI spec string of a distribution."""
    if d.kind in ("geo-n", "geo-n0"):
        return f"{d.kind}:{_fmt(d.s)}"
    if d.kind == "poisson":
        return f"poisson:{_fmt(d.lam)}"
    if d.kind == "nb":
        return f"nb:{_fmt(d.r)},{_fmt(d.s)}"
    if d.kind in ("binomial", "one-or-many", "none-or-many"):
        return f"{d.kind}:{d.n},{_fmt(d.r)}"
    return "pmf:" + ",".join(_fmt(w) for w in d.weights)


def _as_count(text):
    value = float(text)
    if not value.is_integer():
        raise DistributionError(f"expected an integer, got '{text}'")
    return int(value)


def _split_values(rest):
    parts = [v.strip() for v in rest.split(",")] if rest.strip() else []
    if any(not v for v in parts):
        raise DistributionError("empty value in distribution spec")
    try:
        [float(v) for v in parts]
    except ValueError:
        raise DistributionError(f"non-numeric value in '{rest}'")
    return parts


def family_member(kind, value, fixed=None):
    """Member of a one-parameter family at scanned parameter ``value``."""
    fixed = fixed or {}
    if kind not in FAMILIES:
        raise DistributionError(f"'{kind}' is not a one-parameter family")
    missing = [name for name in FAMILIES[kind]["fixed"] if name not in fixed]
    if missing:
        raise DistributionError(f"family '{kind}' needs fixed {', '.join(missing)}")
    if kind == "geo-n":
        return geometric_n(value)
    if kind == "geo-n0":
        return geometric_n0(value)
    if kind == "poisson":
        return poisson(value)
    if kind == "binomial":
        return binomial(fixed["n"], value)
    if kind == "nb":
        return neg_binomial(fixed["r"], value)
    if kind == "one-or-many":
        return one_or_many(fixed["n"], value)
    return none_or_many(fixed["n"], value)


def parse_family(text):
    """'binomial:3' -> ('binomial', {'n': 3}); 'poisson' -> ('poisson', {})."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in FAMILIES:
        raise DistributionError(f"unknown or non-parametric family '{kind}'")
    values = _split_values(rest)
    names = FAMILIES[kind]["fixed"]
    if len(values) != len(names):
        raise DistributionError(f"family '{kind}' takes {len(names)} fixed value(s)")
    fixed = {}
    for name, raw in zip(names, values):
        fixed[name] = _as_count(raw) if name == "n" else float(raw)
    return kind, fixed


def parse_spec(text):
    """Parse a CLI distribution spec such as 'binomial:3,0.5' or 'pmf:0,0.2,0.3,0.5'."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in KINDS:
        raise DistributionError(f"unknown distribution '{kind}'")
    values = _split_values(rest)

    if kind == "pmf":
        weights = [float(v) for v in values]
        total = math.fsum(weights)
        if not weights or abs(total - 1.0) > 1e-6:
            raise DistributionError(f"pmf weights sum to {total!r}, not 1")
        return finite_pmf([w / total for w in weights])

    arity = 1 if kind in ("geo-n", "geo-n0", "poisson") else 2
    if len(values) != arity:
        raise DistributionError(f"'{kind}' takes {arity} value(s), got {len(values)}")
    if arity == 1:
        return family_member(kind, float(values[0]))
    if kind == "nb":
        return neg_binomial(float(values[0]), float(values[1]))
    builders = {"binomial": binomial, "one-or-many": one_or_many, "none-or-many": none_or_many}
    return builders[kind](_as_count(values[0]), float(values[1]))
