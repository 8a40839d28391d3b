"""Checkpoint wrapper exposing the two feature tap points.

post_projection is the standard embedding (pooled feature through the
projection head). pre_final_layernorm captures the pooled hidden state
just before the encoder's last layer normalization, the tap used when
mean subtraction happens inside the network rather than on the output
embeddings. Both are captured with forward hooks so any CLIP-family
checkpoint works unmodified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .errors import ModelResolutionError

TAP_POST_PROJECTION = "post_projection"
TAP_PRE_FINAL_LAYERNORM = "pre_final_layernorm"
TAPS = (TAP_POST_PROJECTION, TAP_PRE_FINAL_LAYERNORM)


def _check_tap(tap: str) -> None:
    if tap not in TAPS:
        raise ModelResolutionError(f"tap must be one of {TAPS}, got {tap!r}")


@dataclass
class ClipBackend:
    """A CLIP-style model plus its preprocessing, ready for batch encoding."""

    model: "torch.nn.Module"
    image_processor: object
    tokenizer: object
    device: str = "cpu"

    def __post_init__(self):
        self.model = self.model.to(self.device).eval()

    @classmethod
    def from_pretrained(cls, model_id: str, device: str = "cpu") -> "ClipBackend":
        from transformers import CLIPImageProcessor, CLIPModel, CLIPTokenizer

        try:
            model = CLIPModel.from_pretrained(model_id)
            image_processor = CLIPImageProcessor.from_pretrained(model_id)
            tokenizer = CLIPTokenizer.from_pretrained(model_id)
        except Exception as exc:
            raise ModelResolutionError(f"cannot load checkpoint {model_id!r}: {exc}") from exc
        return cls(model, image_processor, tokenizer, device)

    # -- images ---------------------------------------------------------------

    def encode_images(self, images: Sequence, tap: str, batch_size: int = 32) -> np.ndarray:
        _check_tap(tap)
        chunks = []
        for start in range(0, len(images), batch_size):
            batch = images[start : start + batch_size]
            pixel = self.image_processor(images=list(batch), return_tensors="pt")[
                "pixel_values"
            ].to(self.device)
            chunks.append(self._image_features(pixel, tap))
        return np.concatenate(chunks, axis=0)

    def _image_features(self, pixel_values: torch.Tensor, tap: str) -> np.ndarray:
        vision = self.model.vision_model
        captured: dict = {}
        hook = vision.post_layernorm.register_forward_hook(
            lambda module, inputs, output: captured.__setitem__("pre", inputs[0].detach())
        )
        try:
            with torch.no_grad():
                out = vision(pixel_values=pixel_values)
                if tap == TAP_POST_PROJECTION:
                    feats = self.model.visual_projection(out.pooler_output)
                else:
                    feats = captured["pre"]
        finally:
            hook.remove()
        return feats.cpu().numpy().astype(np.float32)

    # -- texts ----------------------------------------------------------------

    def encode_texts(self, texts: Sequence[str], tap: str, batch_size: int = 64) -> np.ndarray:
        _check_tap(tap)
        chunks = []
        for start in range(0, len(texts), batch_size):
            batch = list(texts[start : start + batch_size])
            enc = self.tokenizer(batch, padding=True, truncation=True, return_tensors="pt")
            chunks.append(
                self._text_features(
                    enc["input_ids"].to(self.device),
                    enc["attention_mask"].to(self.device),
                    tap,
                )
            )
        return np.concatenate(chunks, axis=0)

    def _text_features(
        self, input_ids: torch.Tensor, attention_mask: torch.Tensor, tap: str
    ) -> np.ndarray:
        text_model = self.model.text_model
        captured: dict = {}
        hook = text_model.final_layer_norm.register_forward_hook(
            lambda module, inputs, output: captured.__setitem__("pre", inputs[0].detach())
        )
        try:
            with torch.no_grad():
                out = text_model(input_ids=input_ids, attention_mask=attention_mask)
                if tap == TAP_POST_PROJECTION:
                    feats = self.model.text_projection(out.pooler_output)
                else:
                    feats = captured["pre"][
                        torch.arange(input_ids.shape[0], device=input_ids.device),
                        self._pool_positions(input_ids),
                    ]
        finally:
            hook.remove()
        return feats.cpu().numpy().astype(np.float32)

    def _pool_positions(self, input_ids: torch.Tensor) -> torch.Tensor:
        # mirror the model's own end-of-text pooling, including the legacy
        # behavior for checkpoints whose config still says eos_token_id == 2
        eos_id = getattr(self.model.text_model, "eos_token_id", None)
        if eos_id is None:
            eos_id = self.model.config.text_config.eos_token_id
        ids = input_ids.to(torch.int)
        if eos_id == 2:
            return ids.argmax(dim=-1)
        return (ids == eos_id).int().argmax(dim=-1)
