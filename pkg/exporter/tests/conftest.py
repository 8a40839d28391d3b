import json
import string

import numpy as np
import pytest
import torch
from PIL import Image
from transformers import CLIPConfig, CLIPImageProcessor, CLIPModel, CLIPTokenizer

from vlexport.backend import ClipBackend

HIDDEN = 32
PROJECTION = 16
IMAGE_SIZE = 32
VOCAB_SIZE = 600
BOS_ID, EOS_ID = 597, 598


def tiny_config() -> CLIPConfig:
    return CLIPConfig(
        text_config={
            "hidden_size": HIDDEN,
            "intermediate_size": 64,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "max_position_embeddings": 32,
            "vocab_size": VOCAB_SIZE,
            "bos_token_id": BOS_ID,
            "eos_token_id": EOS_ID,
            "pad_token_id": EOS_ID,
        },
        vision_config={
            "hidden_size": HIDDEN,
            "intermediate_size": 64,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "image_size": IMAGE_SIZE,
            "patch_size": 16,
        },
        projection_dim=PROJECTION,
    )


def write_tokenizer_files(directory):
    vocab = {"<|startoftext|>": BOS_ID, "<|endoftext|>": EOS_ID}
    idx = 0
    for ch in string.ascii_lowercase + string.digits + ".,{}- '":
        vocab[ch] = idx
        idx += 1
        vocab[ch + "</w>"] = idx
        idx += 1
    (directory / "vocab.json").write_text(json.dumps(vocab))
    (directory / "merges.txt").write_text("#version: 0.2\n")


@pytest.fixture(scope="session")
def tiny_backend(tmp_path_factory):
    torch.manual_seed(0)
    model = CLIPModel(tiny_config()).eval()
    processor = CLIPImageProcessor(
        size={"shortest_edge": IMAGE_SIZE},
        crop_size={"height": IMAGE_SIZE, "width": IMAGE_SIZE},
    )
    tok_dir = tmp_path_factory.mktemp("tok")
    write_tokenizer_files(tok_dir)
    tokenizer = CLIPTokenizer(str(tok_dir / "vocab.json"), str(tok_dir / "merges.txt"))
    return ClipBackend(model, processor, tokenizer)


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory, tiny_backend):
    """The tiny model saved in transformers layout, loadable by model id."""
    path = tmp_path_factory.mktemp("checkpoint")
    tiny_backend.model.save_pretrained(path)
    tiny_backend.image_processor.save_pretrained(path)
    tiny_backend.tokenizer.save_pretrained(path)
    return path


def make_images(directory, count, size=IMAGE_SIZE, seed=0):
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        img = Image.fromarray(
            (rng.random((size + 8, size, 3)) * 255).astype("uint8")
        )
        path = directory / f"sample_{i:03d}.png"
        img.save(path)
        paths.append(path)
    return paths


@pytest.fixture()
def image_dir(tmp_path):
    directory = tmp_path / "imgs"
    directory.mkdir()
    make_images(directory, 10)
    return directory
