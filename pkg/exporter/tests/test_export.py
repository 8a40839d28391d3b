import json

import numpy as np
import pytest
import torch

import distnorm
from distnorm.storeio import load_corpus, manifest_path_for, read_embeddings, read_manifest

from vlexport.backend import TAP_POST_PROJECTION, TAP_PRE_FINAL_LAYERNORM
from vlexport.datasets import PROMPT_TEMPLATE, load_image_records
from vlexport.errors import DatasetError, DimensionMismatchError
from vlexport.export import export_embeddings
from vlexport.formats import EmbeddingWriter

from conftest import HIDDEN, PROJECTION


class TestImageExport:
    def test_emb1_readable_by_engine(self, tiny_backend, image_dir, tmp_path):
        written = export_embeddings(
            None, tmp_path / "out", images=image_dir, backend=tiny_backend
        )
        emb = read_embeddings(written["images"])
        assert len(emb) == 10
        assert emb.dim == PROJECTION
        assert emb.modality == "image"
        assert emb.ids == tuple(f"sample_{i:03d}" for i in range(10))
        assert np.all(np.isfinite(emb.matrix))

    def test_pre_layernorm_tap_has_hidden_width(self, tiny_backend, image_dir, tmp_path):
        written = export_embeddings(
            None, tmp_path / "out", images=image_dir,
            tap=TAP_PRE_FINAL_LAYERNORM, backend=tiny_backend,
        )
        emb = read_embeddings(written["images"])
        assert emb.dim == HIDDEN

    def test_taps_are_consistent(self, tiny_backend, image_dir, tmp_path):
        # pushing the pre-layernorm tap through the model's own final
        # normalization and projection must reproduce the standard embedding
        pre = export_embeddings(
            None, tmp_path / "pre", images=image_dir,
            tap=TAP_PRE_FINAL_LAYERNORM, backend=tiny_backend,
        )
        post = export_embeddings(
            None, tmp_path / "post", images=image_dir,
            tap=TAP_POST_PROJECTION, backend=tiny_backend,
        )
        pre_mat = read_embeddings(pre["images"]).matrix
        post_mat = read_embeddings(post["images"]).matrix
        model = tiny_backend.model
        with torch.no_grad():
            recon = model.visual_projection(
                model.vision_model.post_layernorm(torch.tensor(pre_mat, dtype=torch.float32))
            ).numpy()
        assert np.allclose(recon, post_mat, atol=1e-5)

    def test_batching_does_not_change_values(self, tiny_backend, image_dir, tmp_path):
        small = export_embeddings(
            None, tmp_path / "small", images=image_dir, batch_size=3, backend=tiny_backend
        )
        big = export_embeddings(
            None, tmp_path / "big", images=image_dir, batch_size=64, backend=tiny_backend
        )
        a = read_embeddings(small["images"]).matrix
        b = read_embeddings(big["images"]).matrix
        assert np.allclose(a, b, atol=1e-5)

    def test_index_mode_with_labels_and_pairs(self, tiny_backend, image_dir, tmp_path):
        index = tmp_path / "index.jsonl"
        files = sorted(image_dir.iterdir())
        lines = []
        for i, path in enumerate(files[:4]):
            lines.append(
                json.dumps(
                    {
                        "id": f"im{i}",
                        "path": str(path),
                        "label": f"class{i % 2}",
                        "pairs": [f"cap{i}"],
                    }
                )
            )
        index.write_text("\n".join(lines) + "\n")
        written = export_embeddings(
            None, tmp_path / "out", images=index, backend=tiny_backend
        )
        records = read_manifest(manifest_path_for(written["images"]))
        assert [r["id"] for r in records] == ["im0", "im1", "im2", "im3"]
        assert records[0]["label"] == "class0"
        assert records[0]["pairs"] == ["cap0"]


class TestTextExport:
    def test_class_prompts_rows_and_labels(self, tiny_backend, tmp_path):
        classes = tmp_path / "classes.txt"
        classes.write_text("cat\ndog\npelican\n")
        written = export_embeddings(
            None, tmp_path / "out", classes=classes, backend=tiny_backend
        )
        emb = read_embeddings(written["prompts"])
        assert len(emb) == 3
        assert emb.modality == "text"
        assert emb.ids == ("cat", "dog", "pelican")
        records = read_manifest(manifest_path_for(written["prompts"]))
        assert all(r["label"] == r["id"] for r in records)

    def test_prompt_template(self):
        assert PROMPT_TEMPLATE.format("tabby cat") == "a photo of tabby cat."

    def test_prompt_text_drives_the_embedding(self, tiny_backend, tmp_path):
        classes = tmp_path / "classes.txt"
        classes.write_text("cat\ndog\n")
        written = export_embeddings(
            None, tmp_path / "out", classes=classes, backend=tiny_backend
        )
        emb = read_embeddings(written["prompts"])
        direct = tiny_backend.encode_texts(
            ["a photo of cat.", "a photo of dog."], TAP_POST_PROJECTION
        )
        assert np.allclose(emb.matrix, direct.astype(np.float64), atol=1e-6)

    def test_captions_with_pairs(self, tiny_backend, tmp_path):
        captions = tmp_path / "caps.jsonl"
        captions.write_text(
            json.dumps({"id": "c0", "text": "a cat", "pairs": ["i0"]})
            + "\n"
            + json.dumps({"id": "c1", "text": "a dog", "pairs": ["i1"]})
            + "\n"
        )
        written = export_embeddings(
            None, tmp_path / "out", captions=captions, backend=tiny_backend
        )
        records = read_manifest(manifest_path_for(written["captions"]))
        assert records[0]["pairs"] == ["i0"]
        emb = read_embeddings(written["captions"])
        assert emb.dim == PROJECTION

    def test_pre_layernorm_text_tap(self, tiny_backend, tmp_path):
        captions = tmp_path / "caps.jsonl"
        captions.write_text(json.dumps({"id": "c0", "text": "a cat"}) + "\n")
        written = export_embeddings(
            None, tmp_path / "out", captions=captions,
            tap=TAP_PRE_FINAL_LAYERNORM, backend=tiny_backend,
        )
        emb = read_embeddings(written["captions"])
        assert emb.dim == HIDDEN
        # final layernorm + projection of the tap reproduces the embedding
        model = tiny_backend.model
        with torch.no_grad():
            recon = model.text_projection(
                model.text_model.final_layer_norm(
                    torch.tensor(emb.matrix, dtype=torch.float32)
                )
            ).numpy()
        direct = tiny_backend.encode_texts(["a cat"], TAP_POST_PROJECTION)
        assert np.allclose(recon, direct, atol=1e-5)


class TestDeterminism:
    def test_identical_manifests_on_reexport(self, tiny_backend, image_dir, tmp_path):
        classes = tmp_path / "classes.txt"
        classes.write_text("cat\ndog\n")
        outs = []
        for name in ("a", "b"):
            written = export_embeddings(
                None, tmp_path / name, images=image_dir, classes=classes,
                backend=tiny_backend,
            )
            outs.append(written)
        for kind in ("images", "prompts"):
            m1 = manifest_path_for(outs[0][kind]).read_bytes()
            m2 = manifest_path_for(outs[1][kind]).read_bytes()
            assert m1 == m2


class TestEndToEnd:
    def test_exported_corpus_scores_in_engine(self, tiny_backend, image_dir, tmp_path):
        files = sorted(image_dir.iterdir())
        index = tmp_path / "index.jsonl"
        index.write_text(
            "\n".join(
                json.dumps({"id": f"i{k}", "path": str(p), "pairs": [f"c{k}"]})
                for k, p in enumerate(files)
            )
            + "\n"
        )
        captions = tmp_path / "caps.jsonl"
        captions.write_text(
            "\n".join(
                json.dumps({"id": f"c{k}", "text": f"picture number {k}"})
                for k in range(len(files))
            )
            + "\n"
        )
        written = export_embeddings(
            None, tmp_path / "out", images=index, captions=captions, backend=tiny_backend
        )
        corpus = load_corpus(written["images"], written["captions"])
        assert set(corpus.links) == {f"i{k}" for k in range(len(files))}
        images = distnorm.l2_normalize(corpus.image_set)
        texts = distnorm.l2_normalize(corpus.text_set)
        scores = distnorm.score_matrix(
            images, texts,
            distnorm.SimilarityConfig(measure=distnorm.Measure.DN),
            mu_img=distnorm.exact_mean(images),
            mu_txt=distnorm.exact_mean(texts),
        )
        report = distnorm.recall_at_k(scores, corpus.links, [1, 5], "image_to_text")
        assert 0.0 <= report.recalls[1] <= report.recalls[5] <= 1.0


class TestErrors:
    def test_empty_image_dir(self, tiny_backend, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        with pytest.raises(DatasetError):
            export_embeddings(None, tmp_path / "out", images=empty, backend=tiny_backend)

    def test_duplicate_image_ids(self, tiny_backend, image_dir, tmp_path):
        some = next(iter(sorted(image_dir.iterdir())))
        index = tmp_path / "index.jsonl"
        index.write_text(
            json.dumps({"id": "dup", "path": str(some)}) + "\n"
            + json.dumps({"id": "dup", "path": str(some)}) + "\n"
        )
        with pytest.raises(DatasetError):
            load_image_records(index)

    def test_nothing_to_export(self, tiny_backend, tmp_path):
        with pytest.raises(DatasetError):
            export_embeddings(None, tmp_path / "out", backend=tiny_backend)

    def test_writer_rejects_dimension_drift(self):
        writer = EmbeddingWriter()
        writer.add(np.zeros((2, 4), dtype=np.float32))
        with pytest.raises(DimensionMismatchError):
            writer.add(np.zeros((2, 5), dtype=np.float32))
