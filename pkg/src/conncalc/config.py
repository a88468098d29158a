"""Tolerance defaults.

``CONNCALC_TOL`` in the environment overrides the default residual tolerance.
"""
import os

DEFAULT_TOL = 1e-9
VERDICT_TOL = 1e-8
PERIPHERAL_TOL = 1e-8
LIMIT_TOL = 1e-10
LIMIT_MAX_ITER = 10_000
PF_TOL = 1e-12
PF_MAX_ITER = 100_000


def default_tol():
    """Residual tolerance, honouring ``CONNCALC_TOL`` when it is set."""
    raw = os.environ.get("CONNCALC_TOL")
    if raw is None or raw.strip() == "":
        return DEFAULT_TOL
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"CONNCALC_TOL is not a number: {raw!r}") from None
    if not value > 0:
        raise ValueError(f"CONNCALC_TOL must be positive, got {raw!r}")
    return value


def tolerance_set():
    return {
        "residual": default_tol(),
        "verdict": VERDICT_TOL,
        "peripheral": PERIPHERAL_TOL,
        "limit": LIMIT_TOL,
        "limit_max_iter": LIMIT_MAX_ITER,
    }
