"""Exporter turning vision-language checkpoints into engine-readable files."""

from .backend import ClipBackend, TAP_POST_PROJECTION, TAP_PRE_FINAL_LAYERNORM, TAPS
from .datasets import PROMPT_TEMPLATE
from .export import export_embeddings, export_images, export_texts

__version__ = "0.1.0"
