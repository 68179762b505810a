"""Long-term cognitive network classifier with a recurrence-aware decision head."""

from .dataset import Dataset, RawTable, build_dataset, encode_targets, load_csv, make_folds, normalize_min_max
from .dynamics import ReasoningConfig, StateHistory, classify_attractor, concat_history, run, step
from .evaluation import accuracy, cohen_kappa, compare_decision_heads, cross_validate, grid_search
from .learning import InnerWeights, OuterWeights, fit_inner, fit_outer, pinv
from .model import LAST_STATE, RECURRENCE, LtcnModel, fit, load, relevance, save
from .transfer import TransferFunction

__version__ = "0.1.0"
