"""Trainable real-time skin segmentation.

A ternary color-space pre-filter discards most of each frame, then a
local two-stage diffusion segmenter processes the surviving candidate
windows. Includes training, evaluation and a parallel tile scheduler.
"""

__version__ = "0.1.0"

from .imgio import Raster, read_pgm, read_ppm, write_pgm, write_ppm  # noqa: F401
from .model import SkinColorModel, load_model, save_model, train_model  # noqa: F401
from .pipeline import PipelineConfig, StreamState, process_frame, run_stream  # noqa: F401
