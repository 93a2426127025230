import os
import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)

TAIL_EPS = 1e-15
OUTPUT_DIGITS = 12
BIAS_TARGET = 1e-6
CHUNK_TRIALS = 4096
MAX_THRESHOLD = 100_000
THREADS_ENV = "GWMB_THREADS"

REGIMES = {
    "full": "FullInfo",
    "none": "NoInfo",
    "size": "SizeInfo",
}

STARTERS = ("breaker", "maker")


@dataclass(frozen=True)
class SolverConfig:
    abs_tol: float = 1e-12
    max_iter: int = 10**6
    bracket_grid: int = 4096

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.bracket_grid < 16:
            raise ValueError("bracket_grid must be at least 16")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class GameConfig:
    """Settings for one Monte-Carlo experiment.

    regime is "none" or "size" for the walk/game estimators and "full" for the
    depth-D binary subtree estimator (then ``depth`` must be set). ``threshold``
    is the walk level M at which Maker is declared the winner; None picks the
    smallest M whose residual hit probability is below BIAS_TARGET.
    """
    trials: int = 10_000
    master_seed: int = 0
    regime: str = "none"
    starter: str = "breaker"
    threshold: int | None = None
    max_rounds: int = 10**7
    depth: int | None = None
    confidence: float = 0.95
    workers: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime '{self.regime}'")
        if self.starter not in STARTERS:
            raise ValueError(f"unknown starter '{self.starter}'")
        if self.threshold is not None and self.threshold < 1:
            raise ValueError("threshold must be a positive integer")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")

    @property
    def start_level(self):
        # Initial value of the embedded walk: 1 if Breaker moves first, else 2.
        return 1 if self.starter == "breaker" else 2


def worker_count(requested=None):
    """Number of simulation workers, capped by the GWMB_THREADS variable."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    cap = 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, raw)
    if requested is None:
        return cap
    return max(1, min(int(requested), cap))
