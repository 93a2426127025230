"""Monte-Carlo checks: embedded walks, the literal game and full-information depth oracles."""
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from services import analytic, dist, walk
from services.config import BIAS_TARGET, CHUNK_TRIALS, MAX_THRESHOLD, GameConfig, worker_count
from services.errors import DistributionError, RootSearchError

logger = logging.getLogger(__name__)

MAX_BINARY_DEPTH = 12
NODE_BUDGET = 2_000_000
BUFFER = 4096


@dataclass(frozen=True)
class SimEstimate:
    trials: int
    successes: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    bias_bound: float
    seed: int
    undecided: int = 0
    minus_one: int = 0
    p_unconditional: float | None = None

    def as_dict(self):
        return asdict(self)


def wilson_interval(successes, trials, confidence=0.95):
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _estimate(successes, trials, cfg, bias=0.0, undecided=0, minus_one=0, q=None):
    lo, hi = wilson_interval(successes, trials, cfg.confidence)
    p_hat = successes / trials
    p_unc = None if q is None else q + (1.0 - q) * p_hat
    return SimEstimate(trials, int(successes), p_hat, lo, hi, bias, cfg.master_seed,
                       int(undecided), int(minus_one), p_unc)


def _chunks(trials):
    sizes = [CHUNK_TRIALS] * (trials // CHUNK_TRIALS)
    if trials % CHUNK_TRIALS:
        sizes.append(trials % CHUNK_TRIALS)
    return list(enumerate(sizes))


def _chunk_rng(cfg, index):
    return np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(index,)))


def _fan_out(run_chunk, cfg):
    """Run every chunk and sum the tuples they return; order-independent."""
    chunks = _chunks(cfg.trials)
    workers = worker_count(cfg.workers)
    if workers == 1:
        results = [run_chunk(i, n) for i, n in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(lambda c: run_chunk(*c), chunks))
    return tuple(int(sum(col)) for col in zip(*results))


def success_threshold(inc, start, cfg=None):
    """(M, bias): walk level declared a Maker win and the hit probability it ignores."""
    cfg = cfg or GameConfig()
    if inc.shift == -1:
        x_max, factor = walk.hitting_rho(inc), 1.0
    else:
        try:
            roots = walk.two_boundary_hit(inc.source, start)
            x_max = max(abs(roots.x1), abs(roots.x2))
        except RootSearchError as e:
            logger.warning("threshold from the positive root only: %s", e)
            x_max = walk.positive_root(inc.source)
        factor = 2.0

    if cfg.threshold is not None:
        m = cfg.threshold
    elif x_max <= 0.0:
        m = start + 1
    elif x_max >= 1.0:
        raise DistributionError("walk does not drift upward; no finite success threshold")
    else:
        m = math.floor(math.log(BIAS_TARGET / factor) / math.log(x_max)) + 1
        m = max(m, start + 1)
        if m > MAX_THRESHOLD:
            logger.warning("success threshold %d capped at %d", m, MAX_THRESHOLD)
            m = MAX_THRESHOLD
    return m, factor * x_max**m


def simulate_walk_hit(inc, start, cfg):
    """Breaker's win probability as the exit probability of the embedded walk from ``start``."""
    m, bias = success_threshold(inc, start, cfg)
    table = dist.AliasTable.from_weights(inc.weights)
    logger.debug("walk simulation: start=%d M=%d bias<=%.3g", start, m, bias)

    def run_chunk(index, n):
        rng = _chunk_rng(cfg, index)
        pos = np.full(n, start, dtype=np.int64)
        active = np.ones(n, dtype=bool)
        breaker = minus_one = 0
        for _ in range(cfg.max_rounds):
            idx = np.flatnonzero(active)
            if not len(idx):
                break
            level = pos[idx] + table.draw(rng, len(idx)) + inc.shift
            pos[idx] = level
            down = level <= 0
            breaker += int(np.count_nonzero(down))
            minus_one += int(np.count_nonzero(level == -1))
            active[idx[down | (level >= m)]] = False
        return breaker, minus_one, int(np.count_nonzero(active))

    breaker, minus_one, undecided = _fan_out(run_chunk, cfg)
    if undecided:
        logger.warning("%d walks undecided after %d rounds", undecided, cfg.max_rounds)
    return _estimate(breaker, cfg.trials, cfg, bias, undecided, minus_one)


class _Stream:
    """Buffered offspring counts and uniforms for one chunk."""

    def __init__(self, draw, rng):
        self._draw = draw
        self._rng = rng
        self._counts = []
        self._uniforms = []

    def children(self):
        if not self._counts:
            self._counts = self._draw(self._rng, BUFFER).tolist()
        return self._counts.pop()

    def pick(self, size):
        if not self._uniforms:
            self._uniforms = self._rng.random(BUFFER).tolist()
        return int(self._uniforms.pop() * size)


def _offspring_draw(d, regime, q):
    if regime == "NoInfo":
        return lambda rng, size: dist.sample(d, rng, size)

    keep = 1.0 - q

    def infinite_children(rng, size):
        # thin each child to infinite-marked with prob 1-q, reject all-finite broods
        out = np.empty(0, dtype=np.int64)
        while len(out) < size:
            n = dist.sample(d, rng, 2 * size)
            m = rng.binomial(n, keep)
            out = np.concatenate([out, m[m > 0]])
        return out[:size]

    return infinite_children


def _pop_uniform(frontier, stream):
    i = stream.pick(len(frontier))
    frontier[i], frontier[-1] = frontier[-1], frontier[i]
    return frontier.pop()


def _play(stream, maker_starts, m, max_rounds):
    """One game; returns 'maker', 'breaker0', 'breaker-1' or 'undecided'."""
    frontier = list(range(1, stream.children() + 1))
    next_id = len(frontier) + 1
    maker_turn = maker_starts
    for _ in range(max_rounds):
        if maker_turn:
            if len(frontier) >= m:
                return "maker"
            if not frontier:
                return "breaker0"
            _pop_uniform(frontier, stream)
            k = stream.children()
            frontier.extend(range(next_id, next_id + k))
            next_id += k
        else:
            if not frontier:
                return "breaker-1"
            _pop_uniform(frontier, stream)
        maker_turn = not maker_turn
    return "undecided"


def simulate_game(d, regime, starter, cfg):
    """Play the game on a lazily revealed tree with uniformly random moves."""
    regime = analytic.regime_name(regime)
    if regime == "FullInfo":
        raise ValueError("full-information play is covered by estimate_binary_subtree_prob")
    q = analytic.extinction_q(d) if regime == "SizeInfo" else 0.0
    if q >= 1.0:
        raise DistributionError("SizeInfo play needs a supercritical law")

    walk_law = dist.skew(d, q) if regime == "SizeInfo" else d
    start = 1 if starter == "breaker" else 2
    m, bias = success_threshold(dist.to_increment(walk_law, -2), start, cfg)
    draw = _offspring_draw(d, regime, q)

    def run_chunk(index, n):
        stream = _Stream(draw, _chunk_rng(cfg, index))
        tally = {"maker": 0, "breaker0": 0, "breaker-1": 0, "undecided": 0}
        for _ in range(n):
            tally[_play(stream, starter == "maker", m, cfg.max_rounds)] += 1
        return tally["breaker0"] + tally["breaker-1"], tally["breaker-1"], tally["undecided"]

    breaker, minus_one, undecided = _fan_out(run_chunk, cfg)
    if undecided:
        logger.warning("%d games undecided after %d rounds", undecided, cfg.max_rounds)
    return _estimate(breaker, cfg.trials, cfg, bias, undecided, minus_one,
                     q=q if regime == "SizeInfo" else None)


def depth_iterate_p(d, depth, starter="breaker"):
    """P(no complete binary tree of depth ``depth`` rooted at the origin).

    With Maker moving first the root only needs one child carrying such a
    tree of depth ``depth - 1``, so the value is g(p_{depth-1}).
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if starter == "maker":
        return 0.0 if depth == 0 else float(dist.pgf(d, depth_iterate_p(d, depth - 1)))
    p = 0.0
    for _ in range(depth):
        p = dist.pgf(d, p) + (1.0 - p) * dist.pgf(d, p, 1)
    return p


def _binary_subtree_misses(d, depth, n_trees, rng, root_need=2):
    levels = []
    width = n_trees
    for _ in range(depth):
        counts = dist.sample(d, rng, width)
        levels.append(counts)
        width = int(counts.sum())
        if width > 25 * NODE_BUDGET:
            raise MemoryError(f"tree level of {width} nodes exceeds the node budget")

    qualifies = np.ones(width, dtype=bool)
    for level in range(depth - 1, -1, -1):
        counts = levels[level]
        cum = np.concatenate(([0], np.cumsum(qualifies)))
        ends = np.cumsum(counts)
        need = root_need if level == 0 else 2
        qualifies = (cum[ends] - cum[ends - counts]) >= need
    return int(np.count_nonzero(~qualifies))


def estimate_binary_subtree_prob(d, depth, cfg):
    """Sampled frequency of trees without a complete binary subtree of the given depth at the root.

    ``cfg.starter == "maker"`` relaxes the root to one qualifying child.
    """
    if depth > MAX_BINARY_DEPTH:
        raise ValueError(f"depth {depth} exceeds {MAX_BINARY_DEPTH}")
    mu = dist.mean(d)
    expected = sum(mu**k for k in range(depth + 1))
    batch = max(1, min(CHUNK_TRIALS, int(NODE_BUDGET // max(expected, 1.0))))
    root_need = 1 if cfg.starter == "maker" else 2

    def run_chunk(index, n):
        rng = _chunk_rng(cfg, index)
        misses = 0
        done = 0
        while done < n:
            size = min(batch, n - done)
            misses += _binary_subtree_misses(d, depth, size, rng, root_need)
            done += size
        return (misses,)

    (misses,) = _fan_out(run_chunk, cfg)
    return _estimate(misses, cfg.trials, cfg)


def drift_survival(inc, steps, trials, seed=0):
    """Fraction of walks from 0 that stay >= 0 for ``steps`` steps."""
    table = dist.AliasTable.from_weights(inc.weights)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    pos = np.zeros(trials, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    for _ in range(steps):
        idx = np.flatnonzero(alive)
        if not len(idx):
            break
        level = pos[idx] + table.draw(rng, len(idx)) + inc.shift
        pos[idx] = level
        alive[idx[level < 0]] = False
    return float(np.count_nonzero(alive)) / trials
