"""Constants for rdlab"""

# tolerance ladder
ETA_HERM = 1e-10
ETA_UNIT = 1e-10
ETA_ORTH = 1e-10
ETA_TR = 1e-10
ETA_PSD = 1e-9
ETA_RANK = 1e-10
ETA_RECON = 1e-9
ETA_TP = 1e-9
ETA_CMI = 1e-8
ETA_PROB = 1e-12

MARGINAL_TOL = 1e-10
TRACELESS_TOL = 1e-10
CONSISTENCY_TOL = 1e-9
STRUCTURE_TOL = 1e-8
COMMUTATOR_TOL = 1e-10

NON_CP_WITNESS_THRESHOLD = -1e-6

MAX_DIMENSION = 256

DEFAULT_THETA_START = 0.0
DEFAULT_THETA_STOP = 3.141592653589793
DEFAULT_THETA_COUNT = 181
DEFAULT_ALPHA_FRACTION = 0.9
DEFAULT_SEED = 20240625
DEFAULT_CAMPAIGN_UNITARIES = 10

GRID_FORMAT = "{start:g}:{stop:g}:{count:d}"
SEED_ENVVAR = "RDLAB_SEED"

# file format keys
DIMS = "dims"
RE = "re"
IM = "im"
D_IN = "d_in"
D_OUT_DIMS = "d_out_dims"
TRANSFER = "transfer"
SYSTEM = "system"
JOINT = "joint"
BASIS = "basis"
THETA = "theta"
T = "t"
MIN_EIG = "min_eig"
IS_CP = "is_cp"
COMMUTATOR_NORM = "commutator_norm"
TOLERANCES = "tolerances"
