import io
import json
import math

import numpy as np
import pandas as pd

from services.config import OUTPUT_DIGITS

FLOAT_FORMAT = f"%.{OUTPUT_DIGITS}g"

SOLUTION_COLUMNS = ["regime", "p_conditional", "p_unconditional", "p_bar", "case", "residual",
                    "q", "note"]
SCAN_COLUMNS = ["param", "p", "p_bar", "q", "case"]
ESTIMATE_COLUMNS = ["trials", "successes", "p_hat", "ci_lo", "ci_hi", "bias_bound", "seed"]
WALK_COLUMNS = ["rho", "sigma", "theta", "rho_odd", "theta_odd", "pi_minus1"]


def clean(value):
    """Round floats to the output precision; NaN and infinities become None."""
    if isinstance(value, dict):
        return {k: clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(format(value, f".{OUTPUT_DIGITS}g"))
    return value


def to_json(payload):
    return json.dumps(clean(payload), indent=2)


def generate_csv(records, columns=None, title=None, details=None):
    """CSV with optional '# ' header lines; no timestamps so reruns are byte-identical."""
    if not records:
        return None
    df = pd.DataFrame([clean(r) for r in records])
    if columns:
        extra = [c for c in df.columns if c not in columns]
        df = df.reindex(columns=[*columns, *extra])

    csv_buffer = io.StringIO()
    if title:
        csv_buffer.write(f"# {title}\n")
        for key, value in (details or {}).items():
            csv_buffer.write(f"# {key}: {value}\n")
        csv_buffer.write("#\n")
    df.to_csv(csv_buffer, index=False, float_format=FLOAT_FORMAT)
    return csv_buffer.getvalue()


def generate_solution_csv(solutions, dist_spec=""):
    return generate_csv([s.as_dict() for s in solutions], SOLUTION_COLUMNS,
                        title="Regime solution", details={"Distribution": dist_spec})


def generate_scan_csv(rows, family="", regime=""):
    return generate_csv(rows, SCAN_COLUMNS, title="Parameter scan",
                        details={"Family": family, "Regime": regime})


def generate_estimate_csv(estimate, label=""):
    return generate_csv([estimate.as_dict()], ESTIMATE_COLUMNS, title="Monte-Carlo estimate",
                        details={"Experiment": label})


def generate_walk_csv(quantities, dist_spec=""):
    return generate_csv([quantities.as_dict()], WALK_COLUMNS, title="Walk quantities",
                        details={"Distribution": dist_spec})
