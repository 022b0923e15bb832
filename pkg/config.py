"""
Configuration and constants for the ellreg regularized-integral engine
"""

import os

# === Kernel configuration ===

# Number of q-series terms; |q|^24 < 1e-14 once im(tau) > 0.22
DEFAULT_SERIES_CUTOFF = 24

# Maximum derivative order carried by jets (and by symbolic expansions)
DEFAULT_JET_CAP = 24

# A point closer than this to the lattice counts as a lattice point
POLE_TOLERANCE = 1e-8

# new_context refuses cutoffs with |q|^cutoff above this
CUTOFF_TOLERANCE = 1e-14

# Constant tokens accepted by the integrand DSL
DSL_CONSTANTS = ["g2", "g3", "eta1h", "G4", "G6", "pi"]


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    """Read a positive integer override from the environment"""
    raw = os.environ.get(name)
    if raw is None:
        return default

    raw = raw.strip().strip('"').strip("'")
    try:
        value = int(raw)
    except ValueError:
        print(f"Warning: ignoring {name}={raw!r} (not an integer), using {default}")
        return default

    if value < minimum:
        print(f"Warning: ignoring {name}={value} (must be >= {minimum}), using {default}")
        return default
    return value


SERIES_CUTOFF = _env_int("ELLREG_SERIES_CUTOFF", DEFAULT_SERIES_CUTOFF)
JET_CAP = _env_int("ELLREG_JET_CAP", DEFAULT_JET_CAP, minimum=2)

# === Logging ===

LOG_DIR = os.environ.get("ELLREG_LOG_DIR", "./data/logs")
LOG_LEVEL = os.environ.get("ELLREG_LOG_LEVEL", "INFO").upper()

# === Principal value oracle ===

PV_EPS_LIST = (0.2, 0.1, 0.05)     # excision radii, flat metric
PV_PATCH_RADIUS = 0.35             # polar patch radius before clipping
PV_INNER_FRACTION = 0.6            # cutoff is identically 1 inside this fraction of the patch
PV_RADIAL_NODES = 24               # Gauss-Legendre nodes per annulus
PV_ANGULAR_NODES = 64              # trapezoid nodes around each pole
PV_PANEL_NODES = 256               # periodic trapezoid nodes per lattice direction
PV_BOUNDARY_MARGIN = 0.05          # no pole closer than this to the domain boundary
PV_TOLERANCE = 1e-3
PV_EXTRAPOLATION = "linear"        # "linear" or "eps_log_eps"

# Contour formula
CONTOUR_RADIUS = 1e-2
CONTOUR_NODES = 64
EDGE_NODES = 48                    # Gauss-Legendre nodes per edge panel
EDGE_PANELS = 8

# === Check suites ===

CHECK_TAUS = [1j, 2j, 0.3 + 1.7j]
CHECK_SEED = 20240607
CHECK_RANDOM_POINTS = 20
PROPERTY_CASES = 200

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NONCONVERGENCE = 2
EXIT_CHECK_FAILED = 3


def get_series_cutoff() -> int:
    """Series cutoff, honoring ELLREG_SERIES_CUTOFF"""
    return SERIES_CUTOFF


def get_jet_cap() -> int:
    """Jet cap, honoring ELLREG_JET_CAP"""
    return JET_CAP


def get_pv_defaults() -> dict:
    """
    Default principal value options

    Returns:
        dict with the PvOptions field defaults
    """
    return {
        "eps_list": PV_EPS_LIST,
        "patch_radius": PV_PATCH_RADIUS,
        "radial_nodes": PV_RADIAL_NODES,
        "angular_nodes": PV_ANGULAR_NODES,
        "panel_nodes": PV_PANEL_NODES,
        "extrapolation": PV_EXTRAPOLATION,
    }
