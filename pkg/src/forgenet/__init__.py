"""Forest graph-embedded deep feedforward networks for n << p classification."""

from .data import Dataset, DataError, load_csv, stratified_split
from .masked_net import NetConfig
from .pipeline import ForgeNetModel, feature_importance, fit, predict
from .synth import SynthSpec, simulate

__all__ = [
    "Dataset",
    "DataError",
    "ForgeNetModel",
    "NetConfig",
    "SynthSpec",
    "feature_importance",
    "fit",
    "load_csv",
    "predict",
    "simulate",
    "stratified_split",
]
__version__ = "0.1.0"
