"""Grayscale-image CNN triage of executable binaries."""
from .imagizer import GrayImage, bytes_to_image, image_to_pgm, pgm_to_image, resize_to_plane
from .nn import ModelSpec, Network, forward, load_model, save_model
from .trainer import ConfusionMatrix, TrainConfig, evaluate, fit

__version__ = "0.1.0"
