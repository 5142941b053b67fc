from .adam import Adam
from .model import PARAM_ORDER, ConvSpec, ModelSpec, Network, PoolSpec, classify, forward
from .modelfile import dumps_model, load_model, loads_model, save_model

__all__ = [
    "Adam",
    "ConvSpec",
    "ModelSpec",
    "Network",
    "PARAM_ORDER",
    "PoolSpec",
    "classify",
    "dumps_model",
    "forward",
    "load_model",
    "loads_model",
    "save_model",
]
