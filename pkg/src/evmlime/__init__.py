"""Malicious smart contract detection from EVM opcode frequencies, with LIME explanations."""

from evmlime._kernels import BACKEND
from evmlime.binning import BinningModel, best_split, entropy, information_gain
from evmlime.classify import Prediction, predict, rank_features, select_top, train
from evmlime.dataset import Dataset, SplitSpec, load_csv, save_csv, stratified_split
from evmlime.disasm import VOCABULARY, count_frequencies, decode_hex, disassemble
from evmlime.evaluation import Metrics, score
from evmlime.explain import Explanation, LimeConfig, aggregate_verdict, fit_surrogate
from evmlime.sampling import SmoteConfig, smote

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BinningModel", "Dataset", "Explanation", "LimeConfig", "Metrics", "Prediction",
    "SmoteConfig", "SplitSpec", "VOCABULARY", "aggregate_verdict", "best_split", "count_frequencies",
    "decode_hex", "disassemble", "entropy", "fit_surrogate", "information_gain", "load_csv", "predict",
    "rank_features", "save_csv", "score", "select_top", "smote", "stratified_split", "train",
]
