"""Command-line surface tying the scoring engine and evaluators together.

Every subcommand is deterministic given its flags; all randomness flows
through explicit --seed style options. Exit codes: 0 success, 2 usage or
configuration error, 3 I/O or format error, 4 non-finite numerics.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evalmetrics, means, similarity, storeio, synth
from .core import (
    IMAGE_TO_TEXT,
    TEXT_TO_IMAGE,
    EmbeddingSet,
    Measure,
    PairedCorpus,
    SimilarityConfig,
    l2_normalize,
)
from .errors import ConfigError, NumericError, StoreError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _parse_measure(text: str) -> Measure:
    return Measure(text.replace("-", "_").upper())


def _parse_ks(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _load_set(path, normalize: bool) -> EmbeddingSet:
    emb_set = storeio.read_embeddings(path)
    return l2_normalize(emb_set) if normalize else emb_set


def _config_from(args) -> SimilarityConfig:
    return SimilarityConfig(
        measure=_parse_measure(args.measure),
        tau=args.tau,
        mean_factor=args.mean_factor,
        normalize_on_load=not args.no_normalize,
    )


def _mean_for(emb_set, args):
    if args.mean_n is not None:
        return means.sampled_mean(emb_set, args.mean_n, args.mean_seed)
    return means.exact_mean(emb_set)


def _negatives_for(emb_set, args) -> EmbeddingSet:
    if args.neg_n is None or args.neg_n >= len(emb_set):
        return emb_set
    sampled = means.sampled_mean(emb_set, args.neg_n, args.neg_seed)
    idx = [emb_set.index_of(i) for i in sampled.source_ids]
    return EmbeddingSet(
        emb_set.matrix[idx],
        sampled.source_ids,
        emb_set.modality,
        normalized=emb_set.normalized,
    )


def _emit(report: dict, out: str | None) -> None:
    if out:
        storeio.write_report(report, out)
    else:
        print(storeio.dumps_report(report))


def _add_scoring_flags(p: argparse.ArgumentParser, *, default_measure="s0") -> None:
    p.add_argument("--measure", default=default_measure,
                   help="s0|dn|dn-star|first-order-exp|geometric|full")
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--mean-factor", type=float, default=0.5)
    p.add_argument("--mean-n", type=int, default=None,
                   help="estimate means from this many sampled rows (default: all)")
    p.add_argument("--mean-seed", type=int, default=0)
    p.add_argument("--neg-n", type=int, default=None,
                   help="negative-set size for the full measure (default: whole set)")
    p.add_argument("--neg-seed", type=int, default=0)
    p.add_argument("--no-normalize", action="store_true",
                   help="skip unit normalization of loaded embeddings")


def cmd_score(args) -> int:
    cfg = _config_from(args)
    images = _load_set(args.images, cfg.normalize_on_load)
    texts = _load_set(args.texts, cfg.normalize_on_load)
    kwargs = {}
    if cfg.requires_means:
        kwargs["mu_img"] = _mean_for(images, args)
        kwargs["mu_txt"] = _mean_for(texts, args)
    if cfg.requires_negatives:
        kwargs["neg_images"] = _negatives_for(images, args)
        kwargs["neg_texts"] = _negatives_for(texts, args)
    scores = similarity.score_matrix(images, texts, cfg, **kwargs)
    storeio.write_score_matrix(scores, args.out)
    return EXIT_OK


def cmd_retrieve(args) -> int:
    scores = storeio.read_score_matrix(args.scores)
    image_manifest, text_manifest = args.manifests
    links: dict[str, set[str]] = {}
    for rec in storeio.read_manifest(image_manifest):
        for tid in rec["pairs"]:
            links.setdefault(rec["id"], set()).add(tid)
    for rec in storeio.read_manifest(text_manifest):
        for iid in rec["pairs"]:
            links.setdefault(iid, set()).add(rec["id"])
    direction = IMAGE_TO_TEXT if args.direction == "i2t" else TEXT_TO_IMAGE
    if direction == TEXT_TO_IMAGE:
        scores = scores.transposed()
        inverted: dict[str, set[str]] = {}
        for iid, tids in links.items():
            for tid in tids:
                inverted.setdefault(tid, set()).add(iid)
        links = inverted
    report = evalmetrics.recall_at_k(scores, links, _parse_ks(args.k), direction)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config_from(args)
    images = _load_set(args.images, cfg.normalize_on_load)
    prompts = _load_set(args.prompts, cfg.normalize_on_load)
    labels = {
        rec["id"]: rec["label"]
        for rec in storeio.read_manifest(storeio.manifest_path_for(args.images))
        if "label" in rec
    }
    kwargs = {}
    if cfg.requires_means:
        kwargs["mu_img"] = _mean_for(images, args)
        kwargs["mu_txt"] = means.exact_mean(prompts)  # all class prompts
    if cfg.requires_negatives:
        kwargs["neg_images"] = _negatives_for(images, args)
        kwargs["neg_texts"] = _negatives_for(prompts, args)
    report = evalmetrics.classify_topk(
        images, prompts, labels, _parse_ks(args.k), cfg, **kwargs
    )
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def _load_corpus_with(args, ratings=None, preferences=None):
    corpus = storeio.load_corpus(
        args.images, args.texts, ratings_path=ratings, preferences_path=preferences
    )
    if not args.no_normalize:
        corpus = PairedCorpus(
            l2_normalize(corpus.image_set),
            l2_normalize(corpus.text_set),
            corpus.links,
            labels=corpus.labels,
            ratings=corpus.ratings,
            preference_pairs=corpus.preference_pairs,
        )
    return corpus


def cmd_caption_eval(args) -> int:
    cfg = _config_from(args)
    corpus = _load_corpus_with(args, ratings=args.ratings)
    kwargs = {}
    needs_means = cfg.requires_means or args.ref_mode in ("dn", "dn-star")
    if needs_means:
        kwargs["mu_img"] = _mean_for(corpus.image_set, args)
        kwargs["mu_txt"] = _mean_for(corpus.text_set, args)
    if cfg.requires_negatives:
        kwargs["neg_images"] = _negatives_for(corpus.image_set, args)
        kwargs["neg_texts"] = _negatives_for(corpus.text_set, args)
    report = evalmetrics.caption_correlation(
        corpus, cfg, args.coef, args.ref_mode, **kwargs
    )
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_pascal(args) -> int:
    cfg = _config_from(args)
    corpus = _load_corpus_with(args, preferences=args.preferences)
    kwargs = {}
    if cfg.requires_means:
        kwargs["mu_img"] = _mean_for(corpus.image_set, args)
        kwargs["mu_txt"] = _mean_for(corpus.text_set, args)
    if cfg.requires_negatives:
        kwargs["neg_images"] = _negatives_for(corpus.image_set, args)
        kwargs["neg_texts"] = _negatives_for(corpus.text_set, args)
    report = evalmetrics.preference_accuracy(corpus, cfg, **kwargs)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config_from(args)
    corpus = _load_corpus_with(args)
    task = {"retrieval": "retrieval", "classify": "classification"}[args.task]
    counts = _parse_ks(args.counts)
    report = means.ablate_sample_counts(corpus, counts, range(args.seeds), task, cfg)
    _emit(report, args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        dim=args.dim,
        n_pairs=args.n,
        noise_sigma=args.sigma,
        offset_rho=args.rho,
        n_classes=args.classes,
        seed=args.seed,
    )
    corpus = synth.generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    storeio.write_embeddings(
        corpus.image_set, out / "images.emb1",
        pairs=corpus.links, labels=corpus.labels,
    )
    inverse: dict[str, set[str]] = {}
    for iid, tids in corpus.links.items():
        for tid in tids:
            inverse.setdefault(tid, set()).add(iid)
    storeio.write_embeddings(corpus.text_set, out / "texts.emb1", pairs=inverse)
    storeio.write_report(
        {"config": cfg.to_dict(), "generator": means.GENERATOR_ID},
        out / "synth.json",
    )
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    images = _load_set(args.images, not args.no_normalize)
    texts = _load_set(args.texts, not args.no_normalize)
    dn_cfg = SimilarityConfig(
        measure=Measure.DN, tau=args.tau, mean_factor=args.mean_factor,
        normalize_on_load=not args.no_normalize,
    )
    full_cfg = SimilarityConfig(
        measure=Measure.FULL, tau=args.tau, normalize_on_load=not args.no_normalize,
    )
    mu_img = means.exact_mean(images)
    mu_txt = means.exact_mean(texts)
    dn_scores = similarity.score_matrix(images, texts, dn_cfg, mu_img=mu_img, mu_txt=mu_txt)
    full_scores = similarity.score_matrix(
        images, texts, full_cfg,
        neg_images=_negatives_for(images, args),
        neg_texts=_negatives_for(texts, args),
    )
    tau = evalmetrics.rank_agreement(dn_scores, full_scores)
    report = dict(tau.to_dict(), tau=args.tau, neg_n=args.neg_n, neg_seed=args.neg_seed)
    _emit(report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distnorm",
        description="Score cross-modal embeddings and run retrieval-style evaluations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="write a query x candidate score matrix")
    p.add_argument("--images", required=True)
    p.add_argument("--texts", required=True)
    _add_scoring_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("retrieve", help="recall@k from a stored score matrix")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifests", nargs=2, required=True,
                   metavar=("IMAGE_MANIFEST", "TEXT_MANIFEST"))
    p.add_argument("--direction", choices=("i2t", "t2i"), required=True)
    p.add_argument("--k", default="1,5,10")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("classify", help="zero-shot accuracy against class prompts")
    p.add_argument("--images", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--k", default="1,5")
    _add_scoring_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("caption-eval", help="rank correlation against human ratings")
    p.add_argument("--images", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--ref-mode", choices=evalmetrics.REF_MODES, default="none")
    p.add_argument("--coef", choices=("tau_b", "tau_c"), default="tau_c")
    _add_scoring_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_caption_eval)

    p = sub.add_parser("pascal", help="pairwise caption preference accuracy")
    p.add_argument("--images", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--preferences", required=True)
    _add_scoring_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pascal)

    p = sub.add_parser("ablate", help="sweep the sample count used for means")
    p.add_argument("--images", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--task", choices=("retrieval", "classify"), required=True)
    p.add_argument("--counts", default="1,10,100")
    p.add_argument("--seeds", type=int, default=5, help="runs seeds 0..N-1")
    _add_scoring_flags(p, default_measure="dn")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a deterministic synthetic corpus")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--rho", type=float, default=0.4)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "oracle-compare",
        help="rank agreement between the mean-subtracted score and the full reference measure",
    )
    p.add_argument("--images", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--mean-factor", type=float, default=0.5)
    p.add_argument("--neg-n", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, dest="neg_seed",
                   help="seed for sampling the negative sets")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
