import logging

from services import analytic, dist
from services.config import REGIMES
from services.errors import GWMBError, format_solver_error

logger = logging.getLogger(__name__)

ORDER_TOL = 1e-9


def compare_regimes(d, cfg=None, regimes=None, status_callback=None):
    """
    Solves one offspring law in every information regime.
    A regime that fails keeps its row, with the error message instead of numbers.
    """
    rows = []
    for flag in regimes or REGIMES:
        name = analytic.regime_name(flag)
        if status_callback:
            status_callback(f"Solving {name} for {dist.describe(d)}...")
        try:
            sol = analytic.solve(d, flag, cfg)
            rows.append({
                "regime": name,
                "p": sol.p_unconditional,
                "p_bar": sol.p_bar,
                "q": sol.q,
                "case": sol.case,
            })
        except GWMBError as e:
            logger.warning("%s failed for %s: %s", name, dist.describe(d), e)
            rows.append({"regime": name, "p": None, "p_bar": None, "q": None,
                         "case": "error", "error": format_solver_error(e)})
    return rows


def regime_ordering_holds(rows, tol=ORDER_TOL):
    """p(FullInfo) >= p(SizeInfo) >= p(NoInfo).

    Reported, never enforced: Poisson(3) already has p(SizeInfo) < p(NoInfo).
    """
    p = {row["regime"]: row["p"] for row in rows if row.get("p") is not None}
    if not {"FullInfo", "SizeInfo", "NoInfo"} <= p.keys():
        return False
    return p["FullInfo"] >= p["SizeInfo"] - tol and p["SizeInfo"] >= p["NoInfo"] - tol
