"""Command-line entry point.

One subcommand per pipeline stage: corpus synthesis, study serving /
simulation / aggregation, quality-model training and scoring, enhancer
training and application, and evaluation reports. Every subcommand is
reproducible from its config file and seed alone; flags override config
fields. Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import dataio
from .metrics import plcc, preference_report, score_diff_report, srocc
from .study import aggregate_votes, read_votes, simulate_votes, write_scores_csv
from .study.records import write_votes

log = logging.getLogger("percept_loop")

CONFIG_FORMAT_VERSION = 1
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _apply_thread_cap() -> None:
    """PERCEPT_LOOP_THREADS caps internal parallelism (default: cores)."""
    cap = os.environ.get("PERCEPT_LOOP_THREADS")
    if cap:
        import torch
        torch.set_num_threads(max(1, int(cap)))


def _setup_logging(verbosity: str) -> None:
    level = {"quiet": logging.WARNING, "normal": logging.INFO,
             "debug": logging.DEBUG}[verbosity]
    logging.basicConfig(level=level, format="%(levelname)s %(message)s",
                        force=True)


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        config = json.load(f)
    version = config.get("format_version")
    if version != CONFIG_FORMAT_VERSION:
        raise ValueError(
            f"config {path}: format_version must be "
            f"{CONFIG_FORMAT_VERSION}, got {version!r}")
    return config


def _guard_model_output(base, force: bool) -> None:
    base = Path(base)
    if base.suffix in (".pt", ".json"):
        base = base.with_suffix("")
    existing = [p for p in (base.with_suffix(".pt"), base.with_suffix(".json"))
                if p.exists()]
    if existing and not force:
        raise ValueError(
            f"refusing to overwrite {existing[0]} (pass --force to replace)")


def _list_images(directory: Path) -> list[Path]:
    files = [p for p in sorted(directory.rglob("*"))
             if p.suffix.lower() in IMAGE_SUFFIXES]
    if not files:
        raise ValueError(f"no image files under {directory}")
    return files


def _load_quality_model(path):
    from .iqa import QualityModel
    return QualityModel.load(path)


verbosity_option = click.option(
    "--verbosity", type=click.Choice(["quiet", "normal", "debug"]),
    default="normal", show_default=True, help="Console output level.")
seed_option = click.option("--seed", type=int, default=0, show_default=True,
                           help="Root seed for all randomness.")
config_option = click.option(
    "--config", "config_path",
    type=click.Path(exists=True, dir_okay=False), default=None,
    help="JSON config file; flags override its fields.")


@click.group()
def cli():
    """Subjective-study, quality-model, and enhancement pipeline."""
    _apply_thread_cap()


# ---------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------

@cli.group()
def corpus():
    """Synthetic degradation corpora."""


@corpus.command("synth")
@config_option
@seed_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              required=True, help="Corpus output directory.")
@click.option("--force", is_flag=True, help="Replace an existing corpus.")
@verbosity_option
def corpus_synth(config_path, seed, out_dir, force, verbosity):
    """Generate reference/low-light/pseudo-enhanced images + manifest."""
    _setup_logging(verbosity)
    config = load_config(config_path)
    out = Path(out_dir)
    if (out / dataio.MANIFEST_NAME).exists() and not force:
        raise ValueError(
            f"{out / dataio.MANIFEST_NAME} exists (pass --force to replace)")

    if "methods" in config:
        degradation = dataio.DegradationConfig.from_dict(config)
    else:
        degradation = dataio.default_degradation_config()

    if config.get("base_images"):
        root = Path(config_path).parent
        bases = [dataio.load_image(root / p) for p in config["base_images"]]
        ids = [Path(p).stem for p in config["base_images"]]
    else:
        synth = config.get("synthetic_base",
                           {"count": 20, "height": 96, "width": 96})
        rng = np.random.default_rng(seed)
        bases = [dataio.make_synthetic_reference(synth["height"],
                                                 synth["width"], rng)
                 for _ in range(synth["count"])]
        ids = None

    manifest = dataio.generate_degraded_corpus(bases, degradation, seed, out,
                                               content_ids=ids)
    log.info("wrote %d entries to %s", len(manifest.entries), out)


# ---------------------------------------------------------------------
# study
# ---------------------------------------------------------------------

@cli.group()
def study():
    """Pairwise subjective studies."""


@study.command("serve")
@config_option
@seed_option
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Corpus directory (with manifest.json).")
@click.option("--votes", "votes_path", required=True, type=click.Path(),
              help="Append-only vote log (JSONL).")
@click.option("--port", type=int, default=8765, show_default=True)
@verbosity_option
def study_serve(config_path, seed, images_dir, votes_path, port, verbosity):
    """Serve the session HTTP API and the browser frontend."""
    _setup_logging(verbosity)
    config = load_config(config_path)
    from .study.server import create_app

    static_dir = config.get("static_dir")
    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        candidate2 = Path.cwd() / "frontend" / "dist"
        for c in (candidate, candidate2):
            if c.is_dir():
                static_dir = str(c)
                break
    app = create_app(
        images_dir, votes_path,
        methods=config.get("methods"),
        contents=config.get("contents"),
        sanity_rate=config.get("sanity_rate", 0.1),
        min_consistency=config.get("min_consistency", 0.8),
        seed=seed,
        study_id=config.get("study_id", "study"),
        static_dir=static_dir)
    import uvicorn
    log.info("serving on port %d (frontend: %s)", port, static_dir or "none")
    uvicorn.run(app, host="127.0.0.1", port=port,
                log_level="info" if verbosity != "quiet" else "warning")


@study.command("simulate")
@config_option
@seed_option
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output vote log (JSONL).")
@verbosity_option
def study_simulate(config_path, seed, images_dir, out_path, verbosity):
    """Draw a complete simulated study over a corpus."""
    _setup_logging(verbosity)
    config = load_config(config_path)
    manifest = dataio.load_manifest(images_dir)
    votes = simulate_votes(
        manifest, images_dir,
        n_subjects=config.get("n_subjects", 15),
        temperature=config.get("temperature", 0.05),
        seed=seed)
    write_votes(out_path, votes)
    log.info("wrote %d votes to %s", len(votes), out_path)


@study.command("aggregate")
@config_option
@click.option("--votes", "votes_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Opinion-score CSV.")
@verbosity_option
def study_aggregate(config_path, votes_path, out_path, verbosity):
    """Tally a vote log into per-content opinion scores."""
    _setup_logging(verbosity)
    config = load_config(config_path)
    votes = read_votes(votes_path)
    scores = aggregate_votes(
        votes, min_consistency=config.get("min_consistency", 0.8))
    write_scores_csv(scores, out_path)
    log.info("wrote %d opinion scores to %s", len(scores), out_path)


# ---------------------------------------------------------------------
# iqa
# ---------------------------------------------------------------------

def _scored_items(manifest, images_dir, votes_path, min_consistency):
    """(image, score, content_id, method_id) for every scored entry."""
    votes = read_votes(votes_path)
    scores = aggregate_votes(votes, min_consistency=min_consistency)
    by_key = {(s.content_id, s.method_id): s.score for s in scores}
    items = []
    for e in manifest.entries:
        if e.role != "enhanced":
            continue
        key = (e.content_id, e.method_id)
        if key in by_key:
            items.append((dataio.load_image(Path(images_dir) / e.path),
                          by_key[key], e.content_id, e.method_id))
    if not items:
        raise ValueError("no scored corpus entries found for training")
    return items


def _net_config_from_dict(net: dict):
    from .iqa import BackboneConfig, QualityNetConfig

    net = dict(net)
    stage4 = net.pop("stage4_channels", 16)
    backbone = BackboneConfig(
        stage4_channels=stage4,
        stage5_channels=net.pop("stage5_channels", 2 * stage4),
        groups=net.pop("groups", 8),
        blocks_per_stage=net.pop("blocks_per_stage", 1),
        pretrained_weights_path=net.pop("pretrained_weights_path", None))
    for key in ("attention_hidden", "encoder_units", "aux_loss_weights",
                "input_mean", "input_std"):
        if key in net:
            net[key] = tuple(net[key])
    return QualityNetConfig(backbone=backbone, **net)


@cli.group()
def iqa():
    """Blind quality model."""


@iqa.command("train")
@config_option
@seed_option
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--votes", "votes_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Model base path (writes .pt and .json).")
@click.option("--epochs", type=int, default=None,
              help="Override the configured epoch count.")
@click.option("--force", is_flag=True, help="Replace an existing model.")
@verbosity_option
def iqa_train(config_path, seed, images_dir, votes_path, out_path, epochs,
              force, verbosity):
    """Train the quality model on opinion scores aggregated from votes."""
    _setup_logging(verbosity)
    _guard_model_output(out_path, force)
    config = load_config(config_path)
    from .iqa import QualityTrainConfig, split_digest, train_quality_model

    manifest = dataio.load_manifest(images_dir)
    items = _scored_items(manifest, images_dir, votes_path,
                          config.get("min_consistency", 0.8))

    train_kwargs = dict(config.get("train", {}))
    if epochs is not None:
        train_kwargs["epochs"] = epochs
    train_cfg = QualityTrainConfig(**train_kwargs)
    net_cfg = _net_config_from_dict(config.get("net", {}))

    test_fraction = config.get("test_fraction", 0.2)
    split = dataio.split_by_content(manifest, test_fraction, seed)
    train_items = [(im, s) for im, s, cid, _ in items
                   if cid in split.train_content_ids]
    model = train_quality_model(train_items, net_cfg, train_cfg, seed=seed,
                                train_split_digest=split_digest(split))
    base = model.save(out_path)
    split.save(base.with_name(base.name + ".split.json"))

    test_items = [(im, s) for im, s, cid, _ in items
                  if cid in split.test_content_ids]
    if len(test_items) >= 2:
        preds = model.predict([im for im, _ in test_items])
        targets = [s for _, s in test_items]
        if np.ptp(preds) > 0 and np.ptp(targets) > 0:
            log.info("test SROCC %.4f PLCC %.4f (n=%d)",
                     srocc(preds, targets), plcc(preds, targets),
                     len(test_items))
    log.info("saved model to %s (q_max=%.6g, train n=%d)", base,
             model.q_max, len(train_items))


@iqa.command("score")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Scores CSV (path,score,score_s1,score_s2).")
@verbosity_option
def iqa_score(model_path, images_dir, out_path, verbosity):
    """Score every image below a directory at native size."""
    _setup_logging(verbosity)
    model = _load_quality_model(model_path)
    images_dir = Path(images_dir)
    rows = []
    for path in _list_images(images_dir):
        prediction = model.predict_components(dataio.load_image(path))
        rows.append((path.relative_to(images_dir).as_posix(), prediction))
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as f:
        f.write("path,score,score_s1,score_s2\n")
        for rel, p in rows:
            f.write(f"{rel},{p.score:.6f},{p.score_s1:.6f},{p.score_s2:.6f}\n")
    log.info("scored %d images into %s", len(rows), out)


# ---------------------------------------------------------------------
# enhance
# ---------------------------------------------------------------------

@cli.group()
def enhance():
    """Quality-guided enhancement."""


@enhance.command("train")
@config_option
@seed_option
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--model", "model_path", default=None, type=click.Path(),
              help="Frozen quality model (required when lambda > 0).")
@click.option("--lambda", "lambda_", type=float, default=None,
              help="Quality-prior weight (overrides config).")
@click.option("--epochs", type=int, default=None,
              help="Override the configured epoch count.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Enhancer base path (writes .pt and .json).")
@click.option("--force", is_flag=True, help="Replace an existing model.")
@verbosity_option
def enhance_train(config_path, seed, images_dir, model_path, lambda_, epochs,
                  out_path, force, verbosity):
    """Train the enhancer on (low-light, reference) corpus pairs."""
    _setup_logging(verbosity)
    _guard_model_output(out_path, force)
    config = load_config(config_path)
    from .enhance import EnhanceTrainConfig, train_enhancer

    kwargs = dict(config.get("train", {}))
    if lambda_ is not None:
        kwargs["lambda_"] = lambda_
    if epochs is not None:
        kwargs["epochs"] = epochs
    train_cfg = EnhanceTrainConfig(**kwargs)

    manifest = dataio.load_manifest(images_dir)
    contents = manifest.content_ids()
    test_fraction = config.get("test_fraction", 0.0)
    if test_fraction:
        split = dataio.split_by_content(manifest, test_fraction, seed)
        contents = sorted(split.train_content_ids)
    pairs = []
    for cid in contents:
        low = dataio.load_image(
            Path(images_dir) / manifest.entry(cid, "low_light").path)
        ref = dataio.load_image(
            Path(images_dir) / manifest.entry(cid, "reference").path)
        pairs.append((low, ref))

    quality = None
    if train_cfg.lambda_ > 0:
        if model_path is None:
            raise ValueError("--model is required when lambda > 0")
        quality = _load_quality_model(model_path)
    model = train_enhancer(pairs, quality, train_cfg, seed=seed)
    base = model.save(out_path)
    log.info("saved enhancer to %s (lambda=%g, %d pairs)", base,
             train_cfg.lambda_, len(pairs))


@enhance.command("apply")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
@verbosity_option
def enhance_apply(model_path, images_dir, out_dir, verbosity):
    """Enhance images (low-light corpus entries, or every image found)."""
    _setup_logging(verbosity)
    from .enhance import EnhancerModel

    model = EnhancerModel.load(model_path)
    images_dir = Path(images_dir)
    out = Path(out_dir)
    if (images_dir / dataio.MANIFEST_NAME).exists():
        manifest = dataio.load_manifest(images_dir)
        rels = [e.path for e in manifest.entries if e.role == "low_light"]
    else:
        rels = [p.relative_to(images_dir).as_posix()
                for p in _list_images(images_dir)]
    for rel in rels:
        enhanced = model.enhance(dataio.load_image(images_dir / rel))
        dataio.save_image(out / rel, enhanced)
    log.info("enhanced %d images into %s", len(rels), out)


# ---------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------

@cli.group(name="eval")
def eval_group():
    """Evaluation reports."""


@eval_group.command("correlations")
@config_option
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--votes", "votes_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path())
@verbosity_option
def eval_correlations(config_path, model_path, images_dir, votes_path,
                      out_path, verbosity):
    """Rank agreement between model scores and aggregated opinions."""
    _setup_logging(verbosity)
    config = load_config(config_path)
    model = _load_quality_model(model_path)
    manifest = dataio.load_manifest(images_dir)
    items = _scored_items(manifest, images_dir, votes_path,
                          config.get("min_consistency", 0.8))
    contents = None
    if config.get("split_file"):
        split = dataio.SplitSpec.load(config["split_file"])
        side = config.get("side", "test")
        contents = (split.test_content_ids if side == "test"
                    else split.train_content_ids)
    rows = [(im, s, cid, mid) for im, s, cid, mid in items
            if contents is None or cid in contents]
    if len(rows) < 2:
        raise ValueError("need at least two scored items for correlations")
    preds = model.predict([im for im, _, _, _ in rows])
    targets = [s for _, s, _, _ in rows]
    report = {
        "per_item": [
            {"id": f"{cid}:{mid}", "predicted": float(p), "opinion": t}
            for (_, t, cid, mid), p in zip(rows, preds)
        ],
        "summary": {
            "srocc": srocc(preds, targets),
            "plcc": plcc(preds, targets),
            "n": len(rows),
        },
    }
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    log.info("SROCC %.4f PLCC %.4f (n=%d) -> %s",
             report["summary"]["srocc"], report["summary"]["plcc"],
             len(rows), out)


@eval_group.command("scorediff")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory with baseline/ and optimized/ subdirectories.")
@click.option("--out", "out_path", required=True, type=click.Path())
@verbosity_option
def eval_scorediff(model_path, images_dir, out_path, verbosity):
    """Per-image quality-score change from baseline to optimized output."""
    _setup_logging(verbosity)
    model = _load_quality_model(model_path)
    images_dir = Path(images_dir)
    baseline_dir = images_dir / "baseline"
    optimized_dir = images_dir / "optimized"
    if not baseline_dir.is_dir() or not optimized_dir.is_dir():
        raise ValueError(
            f"{images_dir} must contain baseline/ and optimized/")
    pairs = []
    for base_file in _list_images(baseline_dir):
        rel = base_file.relative_to(baseline_dir)
        opt_file = optimized_dir / rel
        if not opt_file.is_file():
            raise ValueError(f"optimized image missing for {rel}")
        pairs.append((dataio.load_image(base_file),
                      dataio.load_image(opt_file), rel.as_posix()))
    report = score_diff_report(model, pairs)
    report.to_json(out_path)
    log.info("fraction_positive %.4f over %d pairs -> %s",
             report.summary["fraction_positive"], len(pairs), out_path)


@eval_group.command("preference")
@click.option("--votes", "votes_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path())
@verbosity_option
def eval_preference(votes_path, out_path, verbosity):
    """Two-method preference percentages from a vote log."""
    _setup_logging(verbosity)
    votes = read_votes(votes_path)
    report = preference_report(votes)
    report.to_json(out_path)
    log.info("overall preference %.4f -> %s", report.summary["overall"],
             out_path)


# ---------------------------------------------------------------------

def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ValueError, KeyError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        click.echo(f"runtime failure: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
