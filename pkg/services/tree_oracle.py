"""Small finite trees and an exact solver for the reach-depth-D Maker-Breaker game.

A game position is a nested sorted tuple: each node is a tuple of
``(mark, child)`` pairs, mark 0 for an open edge and 1 for a fixated one.
Deleted edges disappear together with the subtree behind them.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

from services.config import STARTERS

logger = logging.getLogger(__name__)

MAX_EDGES = 14
MAX_DEPTH = 3
MAX_BRANCHING = 3


def encode(shape):
    return "(" + "".join(encode(child) for child in shape) + ")"


def canonical(children):
    return tuple(sorted(children, key=encode))


def shape_size(shape):
    return len(shape) + sum(shape_size(child) for child in shape)


@dataclass
class FiniteTree:
    """Rooted tree stored as an arena; node 0 is the root."""
    parent: list = field(default_factory=lambda: [-1])
    children: list = field(default_factory=lambda: [[]])
    depth: list = field(default_factory=lambda: [0])

    @classmethod
    def from_shape(cls, shape):
        tree = cls()
        stack = [(0, shape)]
        while stack:
            node, sub = stack.pop()
            for child_shape in sub:
                idx = len(tree.parent)
                tree.parent.append(node)
                tree.children.append([])
                tree.depth.append(tree.depth[node] + 1)
                tree.children[node].append(idx)
                stack.append((idx, child_shape))
        return tree

    @classmethod
    def from_encoding(cls, text):
        stack = [[]]
        for ch in text.strip():
            if ch == "(":
                stack.append([])
            elif ch == ")":
                if len(stack) < 2:
                    raise ValueError(f"unbalanced tree encoding '{text}'")
                done = tuple(stack.pop())
                stack[-1].append(done)
            else:
                raise ValueError(f"unexpected character {ch!r} in tree encoding")
        if len(stack) != 1 or len(stack[0]) != 1:
            raise ValueError(f"'{text}' does not encode a single rooted tree")
        return cls.from_shape(stack[0][0])

    @property
    def edge_count(self):
        return len(self.parent) - 1

    @property
    def height(self):
        return max(self.depth)

    def shape(self, node=0):
        return canonical(self.shape(child) for child in self.children[node])

    def encoding(self):
        return encode(self.shape())

    def binary_height(self, node=0):
        """Largest D with a complete binary tree of depth D rooted at ``node``."""
        heights = sorted((self.binary_height(c) for c in self.children[node]), reverse=True)
        return 1 + heights[1] if len(heights) >= 2 else 0

    def validate(self):
        if self.parent[0] != -1 or self.depth[0] != 0:
            raise ValueError("node 0 must be the root")
        for node, kids in enumerate(self.children):
            for child in kids:
                if self.parent[child] != node:
                    raise ValueError(f"child {child} does not point back to {node}")
                if self.depth[child] != self.depth[node] + 1:
                    raise ValueError(f"depth of {child} is inconsistent")
        if sum(len(kids) for kids in self.children) != self.edge_count:
            raise ValueError("children lists do not cover every edge")


def enumerate_small_trees(max_depth, max_branching, max_edges=MAX_EDGES):
    """Every rooted tree up to the bounds, once, ordered by edge count then encoding."""
    if max_depth > MAX_DEPTH or max_branching > MAX_BRANCHING:
        raise ValueError(f"enumeration is limited to depth <= {MAX_DEPTH}, "
                         f"branching <= {MAX_BRANCHING}")
    level = [()]
    for _ in range(max_depth):
        level = [canonical(kids)
                 for k in range(max_branching + 1)
                 for kids in combinations_with_replacement(level, k)]
    shapes = [s for s in level if shape_size(s) <= max_edges]
    shapes.sort(key=lambda s: (shape_size(s), encode(s)))
    for shape in shapes:
        yield FiniteTree.from_shape(shape)


def _position(shape):
    return tuple(sorted((0, _position(child)) for child in shape))


@lru_cache(maxsize=None)
def _height(node):
    return 1 + max(_height(child) for _, child in node) if node else 0


@lru_cache(maxsize=None)
def _open_edges(node):
    return sum((mark == 0) + _open_edges(child) for mark, child in node)


@lru_cache(maxsize=None)
def _prune(node, reach):
    """Drop subtrees that can no longer reach depth ``reach``; count their open edges."""
    kept = []
    spare = 0
    for mark, child in node:
        if _height(child) + 1 < reach:
            spare += (mark == 0) + _open_edges(child)
        else:
            sub, freed = _prune(child, reach - 1)
            spare += freed
            kept.append((mark, sub))
    return tuple(sorted(kept)), spare


def _reached(node, reach):
    if reach == 0:
        return True
    return any(mark == 1 and _reached(child, reach - 1) for mark, child in node)


@lru_cache(maxsize=None)
def _successors(node, maker):
    """Positions after one move anywhere in ``node``, with the open edges it strands."""
    out = set()
    for i, (mark, child) in enumerate(node):
        rest = node[:i] + node[i + 1:]
        if mark == 0:
            if maker:
                out.add((tuple(sorted(rest + ((1, child),))), 0))
            else:
                out.add((rest, _open_edges(child)))
        for sub, freed in _successors(child, maker):
            out.add((tuple(sorted(rest + ((mark, sub),))), freed))
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def _maker_wins(node, spare, maker_to_move, reach):
    node, freed = _prune(node, reach)
    spare += freed
    if _reached(node, reach):
        return True
    moves = _successors(node, maker_to_move)
    if not moves:
        return False

    # a move on an irrelevant edge is a pass
    if maker_to_move:
        if any(_maker_wins(n, spare + f, False, reach) for n, f in moves):
            return True
        return spare > 0 and _maker_wins(node, spare - 1, False, reach)
    if not all(_maker_wins(n, spare + f, True, reach) for n, f in moves):
        return False
    return not (spare > 0 and not _maker_wins(node, spare - 1, True, reach))


def minimax_depth_game(tree, reach, starter="breaker"):
    """'Maker' if Maker can connect the root to a node at depth ``reach``, else 'Breaker'."""
    if starter not in STARTERS:
        raise ValueError(f"unknown starter '{starter}'")
    if tree.edge_count > MAX_EDGES:
        raise ValueError(f"minimax is limited to {MAX_EDGES} edges")
    position = _position(tree.shape())
    return "Maker" if _maker_wins(position, 0, starter == "maker", reach) else "Breaker"


def binary_criterion(tree, reach, starter="breaker"):
    """Winner predicted by the complete-binary-subtree characterization."""
    if starter == "breaker":
        maker = tree.binary_height() >= reach
    else:
        maker = reach == 0 or any(tree.binary_height(c) >= reach - 1 for c in tree.children[0])
    return "Maker" if maker else "Breaker"


@dataclass
class OracleReport:
    trees: int = 0
    games: int = 0
    counterexamples: list = field(default_factory=list)

    def as_dict(self):
        return {"trees": self.trees, "games": self.games,
                "counterexamples": len(self.counterexamples),
                "cases": self.counterexamples}


def clear_caches():
    for cached in (_height, _open_edges, _prune, _successors, _maker_wins):
        cached.cache_clear()


def run_oracle(max_depth, max_branching, reach, starters=STARTERS):
    """Compare minimax against the binary-subtree criterion on every small tree."""
    report = OracleReport()
    for tree in enumerate_small_trees(max_depth, max_branching):
        report.trees += 1
        for starter in starters:
            report.games += 1
            played = minimax_depth_game(tree, reach, starter)
            predicted = binary_criterion(tree, reach, starter)
            if played != predicted:
                case = {"tree": tree.encoding(), "starter": starter,
                        "minimax": played, "criterion": predicted}
                logger.warning("counterexample: %s", case)
                report.counterexamples.append(case)
    logger.info("oracle: %d trees, %d games, %d counterexamples",
                report.trees, report.games, len(report.counterexamples))
    clear_caches()
    return report
