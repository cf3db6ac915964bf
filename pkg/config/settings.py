"""Default run settings."""
import os

# Lag orders
P = int(os.getenv('VARCAST_P', 2))
S = int(os.getenv('VARCAST_S', 1))

# Preprocessing
PERIOD = int(os.getenv('VARCAST_PERIOD', 52))
EPSILON = float(os.getenv('VARCAST_EPSILON', 0.5))

# Penalty grid
GRID_SIZE = int(os.getenv('VARCAST_GRID_SIZE', 20))
GRID_RATIO = float(os.getenv('VARCAST_GRID_RATIO', 0.01))

# Solver
TOL = float(os.getenv('VARCAST_TOL', 1e-7))
MAX_ITER = int(os.getenv('VARCAST_MAX_ITER', 10000))

# Evaluation
VARIANTS = os.getenv('VARCAST_VARIANTS', 'A,B,C,D')
SCALE = os.getenv('VARCAST_SCALE', 'diff')
SEED = int(os.getenv('VARCAST_SEED', 0))

OUT = os.getenv('VARCAST_OUT', 'out')
