class GWMBError(Exception):
    """Base class for solver and simulator failures."""


class DistributionError(GWMBError, ValueError):
    """Invalid offspring distribution or distribution spec."""


class NotSeparable(GWMBError):
    pass


class RootSearchError(GWMBError):
    pass


class NoTransitionInBracket(RootSearchError):
    pass


class MultipleRoots(RootSearchError):
    pass


class DegenerateParity(RootSearchError):
    pass


class NoNegativeRoot(RootSearchError):
    pass


class DegenerateRoots(RootSearchError):
    pass


class BoundsContradiction(GWMBError):
    pass


def format_solver_error(e):
    """Returns a user-friendly message for the common solver failures."""
    error_msg = str(e)
    if isinstance(e, DistributionError):
        return f"Invalid distribution: {error_msg}"
    if isinstance(e, NotSeparable):
        return f"Distribution is not separable: {error_msg}"
    if isinstance(e, NoTransitionInBracket):
        return f"No phase transition inside the bracket: {error_msg}"
    if isinstance(e, (MultipleRoots, DegenerateParity, NoNegativeRoot, DegenerateRoots)):
        return f"Walk root search failed ({type(e).__name__}): {error_msg}"
    if isinstance(e, RootSearchError):
        return f"Root search failed: {error_msg}"
    if isinstance(e, BoundsContradiction):
        return f"Internal contradiction in bounds: {error_msg}"
    return f"Solver Error: {error_msg}"
