"""Deterministic synthetic paired-embedding corpora.

Each pair shares a latent direction on the unit sphere; per-modality
constant offsets are added before normalization so the modality means
survive as a curved shift, the same geometry real cross-modal encoders
exhibit. Values are snapped to float32 precision at generation time so
in-memory corpora and their on-disk form agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import IMAGE, TEXT, EmbeddingSet, PairedCorpus
from .errors import InvalidConfig

# Spread of latents around their class centroid when classes are requested,
# on the same expected-norm scale as noise_sigma.
CLASS_SPREAD = 0.5
# Latent directions live in a subspace this many dimensions wide, so a
# 1000-pair corpus has genuinely confusable neighbors; full-rank latents
# at dim 64 would make every retrieval trivially perfect.
LATENT_DIM = 6


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the generator; defaults give the standard test corpus."""

    dim: int = 64
    n_pairs: int = 1000
    noise_sigma: float = 0.3
    offset_rho: float = 0.4
    n_classes: int | None = None
    seed: int = 42

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidConfig(f"dim must be >= 2, got {self.dim}")
        if self.n_pairs < 1:
            raise InvalidConfig(f"n_pairs must be >= 1, got {self.n_pairs}")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise InvalidConfig(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if not (np.isfinite(self.offset_rho) and self.offset_rho >= 0):
            raise InvalidConfig(f"offset_rho must be >= 0, got {self.offset_rho!r}")
        if self.n_classes is not None and self.n_classes < 2:
            raise InvalidConfig(f"n_classes must be >= 2 when set, got {self.n_classes}")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n_pairs": self.n_pairs,
            "noise_sigma": float(self.noise_sigma),
            "offset_rho": float(self.offset_rho),
            "n_classes": self.n_classes,
            "seed": self.seed,
        }


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def _noise(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    # Gaussian scaled so a noise vector has expected L2 norm 1, putting the
    # sigma/rho knobs on the same scale as the unit-norm latents.
    return rng.standard_normal(shape) / np.sqrt(shape[1])


def _f32_snap(mat: np.ndarray) -> np.ndarray:
    return mat.astype(np.float32).astype(np.float64)


def planted_offsets(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """The fixed unit offset directions (image, text) a config plants.

    Reproduces the first draws of generate(cfg)'s stream, letting tests
    verify the generated means point the way they were planted.
    """
    rng = np.random.default_rng(cfg.seed)
    u_img = _unit_rows(rng.standard_normal((1, cfg.dim)))[0]
    u_txt = _unit_rows(rng.standard_normal((1, cfg.dim)))[0]
    return u_img, u_txt


def generate(cfg: SynthConfig) -> PairedCorpus:
    """Generate a paired corpus fully determined by cfg.

    Without classes: n_pairs image/text rows linked one to one. With
    n_classes set: latents cluster around class centroids, the text side
    becomes one prompt row per class, and labels plus image-to-prompt
    links are emitted.
    """
    rng = np.random.default_rng(cfg.seed)
    dim, n = cfg.dim, cfg.n_pairs
    u_img = _unit_rows(rng.standard_normal((1, dim)))[0]
    u_txt = _unit_rows(rng.standard_normal((1, dim)))[0]

    latent_dim = min(LATENT_DIM, dim)
    basis, _ = np.linalg.qr(rng.standard_normal((dim, latent_dim)))
    if cfg.n_classes is None:
        latents = _unit_rows(rng.standard_normal((n, latent_dim))) @ basis.T
        class_of = None
    else:
        k = cfg.n_classes
        centroids = _unit_rows(rng.standard_normal((k, latent_dim))) @ basis.T
        class_of = np.arange(n) % k
        # spread stays inside the latent subspace: semantic drift, not noise
        drift = _noise(rng, (n, latent_dim)) @ basis.T
        latents = _unit_rows(centroids[class_of] + CLASS_SPREAD * drift)

    image_rows = _unit_rows(
        latents + cfg.noise_sigma * _noise(rng, (n, dim)) + cfg.offset_rho * u_img
    )
    image_ids = tuple(f"img-{i:04d}" for i in range(n))

    if cfg.n_classes is None:
        text_rows = _unit_rows(
            latents + cfg.noise_sigma * _noise(rng, (n, dim)) + cfg.offset_rho * u_txt
        )
        text_ids = tuple(f"txt-{i:04d}" for i in range(n))
        links = {image_ids[i]: frozenset({text_ids[i]}) for i in range(n)}
        labels = None
    else:
        k = cfg.n_classes
        text_rows = _unit_rows(
            centroids + cfg.noise_sigma * _noise(rng, (k, dim)) + cfg.offset_rho * u_txt
        )
        text_ids = tuple(f"cls-{c:03d}" for c in range(k))
        labels = {image_ids[i]: text_ids[class_of[i]] for i in range(n)}
        links = {image_ids[i]: frozenset({labels[image_ids[i]]}) for i in range(n)}

    image_set = EmbeddingSet(_f32_snap(image_rows), image_ids, IMAGE, normalized=True)
    text_set = EmbeddingSet(_f32_snap(text_rows), text_ids, TEXT, normalized=True)
    return PairedCorpus(image_set, text_set, links, labels=labels)
