"""
Configuration settings for the Majorana Dirac-Maxwell verification suite
"""
import os
from dotenv import load_dotenv

load_dotenv()

# Output locations
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "./output")

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "./logs/app.log")

# Randomness
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "20240601"))
DEFAULT_TRIALS = 10000

# Tolerances (relative unless noted)
DEFAULT_TOL = 1e-10
EXACT_TOL = 1e-12
DEGENERATE_AXIS_EPS = 1e-8

# Phase recovery thresholds
FRAME_COND_MAX = 1e6
DET_FLOOR_FACTOR = 1e-8          # determinant floor = factor * m^2
UNIT_CIRCLE_TOL_ANALYTIC = 1e-6
UNIT_CIRCLE_TOL_LATTICE = 1e-3
STRUCTURAL_ZERO_TOL = 1e-9       # |v0|, |u0|, |w0| relative to the spatial norm

# Jets
JET_MAX_ORDER = 11               # Gauss source of order-9 data needs two more
RECOVERY_JET_ORDER = 4           # J jets: 3 for the phase, one more for the Dirac residual
FOURTH_DERIV_JET_ORDER = 9       # B jets for the fourth-derivative extraction

# Finite differences
STENCIL_ORDERS = (4, 6)
DEFAULT_STENCIL_ORDER = 4
TIME_STENCIL_POINTS = 7

# Lattice evolution
CFL_SAFETY = 0.4
INSTABILITY_GROWTH = 1e6         # max allowed growth of the field norm over a run
EVOLVE_LOG_EVERY = 50

# Worked example
EXAMPLE_MASSES = (0.5, 1.0, 2.0)
EXAMPLE_RADIUS = 0.5
EXAMPLE_TOL = 1e-9

# Initial data
INITIAL_CONSTRAINT_TOL = 1e-8   # quadrature residual of the Gauss constraint
QUADRATURE_NODES = 8
