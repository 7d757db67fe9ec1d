"""Command-line entry points for every pipeline stage."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import dataset as ds
from . import embedding as emb
from . import genclient as gen
from . import interrogator as intr
from . import metrics as mx
from . import shield as shd
from . import stealer as st
from . import synth
from .config import Config, load_config
from .prompts import (
    ModifierVocabulary,
    Taxonomy,
    build_vocabulary,
    default_taxonomy,
    parse_prompt,
)


def _load_cfg(config_path: str | None) -> Config:
    return load_config(config_path)


def _taxonomy(cfg: Config) -> Taxonomy:
    tdir = cfg.get("paths.taxonomy_dir")
    return Taxonomy.from_dir(tdir) if tdir else default_taxonomy()


def _caption_model(cfg: Config) -> st.CaptionModel:
    kind = cfg.get("caption.backend", "mock")
    if kind == "mock":
        return st.MockCaptionModel()
    if kind == "blip":
        return st.BlipCaptionModel(cfg.get("caption.model", "Salesforce/blip-image-captioning-base"))
    raise click.ClickException(f"unknown caption backend: {kind!r}")


def _stealer_cfg(cfg: Config) -> st.StealerConfig:
    return st.StealerConfig(
        threshold=float(cfg.get("stealer.threshold", 0.6)),
        min_count=int(cfg.get("stealer.min_count", 10)),
        train_seed=int(cfg.get("stealer.train_seed", 0)),
        epochs=int(cfg.get("stealer.epochs", 15)),
        batch_size=int(cfg.get("stealer.batch_size", 32)),
        learning_rate=float(cfg.get("stealer.learning_rate", 1e-3)),
        input_size=int(cfg.get("stealer.input_size", 64)),
    )


def _shield_cfg(cfg: Config) -> shd.ShieldConfig:
    return shd.ShieldConfig(
        method=cfg.get("shield.method", "ifgsm"),
        steps=int(cfg.get("shield.steps", 100)),
        epsilon=float(cfg.get("shield.epsilon", 0.2)),
        cw_learning_rate=float(cfg.get("shield.cw_learning_rate", 0.05)),
        cw_tradeoff=float(cfg.get("shield.cw_tradeoff", 0.001)),
        removed_category=cfg.get("shield.removed_category", "artist"),
    )


def _interrogator_cfg(cfg: Config) -> intr.InterrogatorConfig:
    return intr.InterrogatorConfig(
        flavor_top_count=int(cfg.get("interrogator.flavor_top_count", 2048)),
        max_iterations=int(cfg.get("interrogator.max_iterations", 25)),
    )


def _gen_size(cfg: Config) -> tuple[int, int]:
    return int(cfg.get("genclient.width", 512)), int(cfg.get("genclient.height", 512))


def _load_clf(checkpoint: str, vocab_path: str, min_count: int) -> tuple[st.ModifierClassifier, ModifierVocabulary, dict]:
    vocab = ModifierVocabulary.from_json(Path(vocab_path).read_text("utf-8"), min_count)
    clf, sidecar = st.load_classifier(checkpoint, vocab)
    return clf, vocab, sidecar


def _make_attack(name: str, caption, clf, scfg, backend, banks, icfg):
    if name == "stealer":
        return lambda img: st.steal_prompt(caption, clf, img, scfg)
    if name == "caption_only":
        return lambda img: intr.caption_baseline(caption, img)
    if name == "interrogator":
        return lambda img: intr.interrogate(caption, backend, img, banks, icfg)
    raise click.ClickException(f"unknown attack: {name!r}")


config_option = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="TOML config with dotted keys.")
seed_option = click.option("--seed", type=int, default=0, show_default=True, help="Seed for splits and generation.")


@click.group()
def main():
    """Prompt stealing toolkit: attacks, baselines, metrics, and the defense."""


@main.command()
@config_option
@seed_option
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None, help="Where to write the ingest error report.")
def ingest(config_path, seed, records_path, out_path):
    """Load JSONL prompt-image records and report invalid lines."""
    result = ds.load_records(records_path)
    click.echo(f"loaded {len(result.records)} records, {len(result.errors)} invalid lines")
    if out_path:
        report = [{"line": e.line_no, "reason": e.reason} for e in result.errors]
        Path(out_path).write_text(json.dumps(report, indent=2), encoding="utf-8")
        click.echo(f"error report -> {out_path}")


@main.command()
@config_option
@seed_option
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
def stats(config_path, seed, records_path, out_path):
    """Corpus statistics: modifier counts, per-prompt means, category shares."""
    cfg = _load_cfg(config_path)
    result = ds.load_records(records_path)
    stats = ds.compute_stats(result.records, _taxonomy(cfg))
    text = stats.to_json()
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"stats -> {out_path}")
    else:
        click.echo(text)


@main.command("build-vocab")
@config_option
@seed_option
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--min-count", type=int, default=None, help="Keep modifiers with count strictly greater.")
@click.option("--out", "out_path", required=True, type=click.Path())
def build_vocab(config_path, seed, records_path, min_count, out_path):
    """Build the frequency-thresholded modifier vocabulary."""
    cfg = _load_cfg(config_path)
    if min_count is None:
        min_count = int(cfg.get("stealer.min_count", 10))
    result = ds.load_records(records_path)
    prompts = [parse_prompt(r.prompt) for r in result.records]
    vocab = build_vocabulary(prompts, min_count, _taxonomy(cfg))
    Path(out_path).write_text(vocab.to_json(), encoding="utf-8")
    click.echo(f"{len(vocab)} labels (min_count={min_count}) -> {out_path}")


@main.command()
@config_option
@seed_option
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--train-fraction", type=float, default=0.8, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(), help="Checkpoint path; vocab lands next to it.")
def train(config_path, seed, records_path, train_fraction, out_path):
    """Train the multi-label modifier classifier."""
    cfg = _load_cfg(config_path)
    scfg = _stealer_cfg(cfg)
    result = ds.load_records(records_path)
    split = ds.dedupe_and_split(result.records, train_fraction, seed)
    prompts = [parse_prompt(r.prompt) for r in split.train]
    vocab = build_vocabulary(prompts, scfg.min_count, _taxonomy(cfg))
    click.echo(f"training on {len(split.train)} records, {len(vocab)} labels ...")
    clf = st.train_classifier(split, vocab, scfg)
    st.save_classifier(clf, out_path, scfg)
    vocab_path = Path(str(out_path) + ".vocab.json")
    vocab_path.write_text(vocab.to_json(), encoding="utf-8")
    click.echo(f"checkpoint -> {out_path}\nvocabulary -> {vocab_path}")


@main.command()
@config_option
@seed_option
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
def steal(config_path, seed, image_path, checkpoint, vocab_path):
    """Steal a prompt from one image with the learned attack."""
    cfg = _load_cfg(config_path)
    scfg = _stealer_cfg(cfg)
    clf, vocab, _ = _load_clf(checkpoint, vocab_path, scfg.min_count)
    stolen = st.steal_prompt(_caption_model(cfg), clf, image_path, scfg)
    click.echo(json.dumps({
        "prompt": stolen.compose(),
        "subject": stolen.subject,
        "modifiers": [{"modifier": m, "posterior": p} for m, p in stolen.modifiers],
        "attack": stolen.attack.value,
        "elapsed_seconds": stolen.elapsed_seconds,
    }, indent=2))


@main.command()
@config_option
@seed_option
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
def interrogate(config_path, seed, image_path):
    """Steal a prompt with the optimization-based baseline."""
    cfg = _load_cfg(config_path)
    backend = emb.create_backend(cfg)
    banks = intr.create_banks(cfg)
    stolen = intr.interrogate(_caption_model(cfg), backend, image_path, banks, _interrogator_cfg(cfg))
    click.echo(json.dumps({
        "prompt": stolen.compose(),
        "subject": stolen.subject,
        "modifiers": [{"modifier": m, "score": s} for m, s in stolen.modifiers],
        "attack": stolen.attack.value,
        "elapsed_seconds": stolen.elapsed_seconds,
    }, indent=2))


@main.command()
@config_option
@seed_option
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--attack", "attack_name", type=click.Choice(["stealer", "caption_only", "interrogator"]), default="stealer", show_default=True)
@click.option("--train-fraction", type=float, default=0.8, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
def evaluate(config_path, seed, records_path, checkpoint, vocab_path, attack_name, train_fraction, out_dir):
    """Evaluate an attack on the test half of the (seeded) split."""
    cfg = _load_cfg(config_path)
    scfg = _stealer_cfg(cfg)
    result = ds.load_records(records_path)
    split = ds.dedupe_and_split(result.records, train_fraction, seed)
    caption = _caption_model(cfg)
    backend = emb.create_backend(cfg)
    genbackend = gen.create_backend(cfg)
    taxonomy = _taxonomy(cfg)
    clf = vocab = None
    if attack_name == "stealer":
        if not checkpoint or not vocab_path:
            raise click.ClickException("--checkpoint and --vocab are required for the stealer attack")
        clf, vocab, _ = _load_clf(checkpoint, vocab_path, scfg.min_count)
    attack = _make_attack(attack_name, caption, clf, scfg, backend, intr.create_banks(cfg), _interrogator_cfg(cfg))
    report = mx.evaluate_attack(
        attack, split.test, backend, genbackend, taxonomy,
        seeds=tuple(cfg.get("metrics.seeds", [0, 1, 2, 3])),
        attack_name=attack_name, config={"seed": seed, "train_fraction": train_fraction},
        gen_size=_gen_size(cfg),
    )
    paths = mx.write_report_files(report, out_dir, stem=f"attack_{attack_name}")
    click.echo(f"means: {json.dumps(report.means)}")
    for p in paths:
        click.echo(f"wrote {p}")


@main.command("shield")
@config_option
@seed_option
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--prompt", "target_prompt", required=True, help="Target prompt whose category evidence to remove.")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def shield_cmd(config_path, seed, image_path, target_prompt, checkpoint, vocab_path, out_path):
    """Write a shielded PNG (plus sidecar JSON) for one target image."""
    cfg = _load_cfg(config_path)
    scfg = _stealer_cfg(cfg)
    shcfg = _shield_cfg(cfg)
    clf, vocab, _ = _load_clf(checkpoint, vocab_path, scfg.min_count)
    parsed = parse_prompt(target_prompt)
    labels = shd.shielded_label_set(parsed, vocab, shcfg.removed_category)
    original = st.multi_hot(parsed.modifiers, vocab)
    shielded = shd.shield_image(clf, image_path, labels, shcfg, original_labels=original)
    shielded.save(out_path)
    click.echo(f"shielded image -> {out_path} (mse={shielded.utility_mse:.6f}, linf={shielded.linf:.4f})")


@main.command("defend-eval")
@config_option
@seed_option
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--attack", "attack_name", type=click.Choice(["stealer", "caption_only", "interrogator"]), default="stealer", show_default=True)
@click.option("--train-fraction", type=float, default=0.8, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def defend_eval(config_path, seed, records_path, checkpoint, vocab_path, attack_name, train_fraction, out_path):
    """Shield the test split and compare the attack on target vs shielded images."""
    cfg = _load_cfg(config_path)
    scfg = _stealer_cfg(cfg)
    result = ds.load_records(records_path)
    split = ds.dedupe_and_split(result.records, train_fraction, seed)
    clf, vocab, _ = _load_clf(checkpoint, vocab_path, scfg.min_count)
    caption = _caption_model(cfg)
    backend = emb.create_backend(cfg)
    genbackend = gen.create_backend(cfg)
    attack = _make_attack(attack_name, caption, clf, scfg, backend, intr.create_banks(cfg), _interrogator_cfg(cfg))
    report = shd.evaluate_defense(
        attack, split.test, clf, vocab, _taxonomy(cfg), _shield_cfg(cfg),
        backend, genbackend, seeds=tuple(cfg.get("metrics.seeds", [0, 1, 2, 3])),
        gen_size=_gen_size(cfg),
    )
    Path(out_path).write_text(report.to_json(), encoding="utf-8")
    click.echo(f"defense report -> {out_path}")
    click.echo(f"mean utility mse: {report.mean_utility_mse:.6f}")
    click.echo(f"unshielded means: {json.dumps(report.unshielded.means)}")
    click.echo(f"shielded means:   {json.dumps(report.shielded.means)}")


@main.command()
@config_option
@seed_option
@click.option("--in", "in_path", required=True, type=click.Path(exists=True), help="Attack report JSON.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--render/--no-render", default=False, help="Also render PNG charts (needs matplotlib).")
def report(config_path, seed, in_path, out_dir, render):
    """Re-emit CSV and plot-spec files from a stored report."""
    data = json.loads(Path(in_path).read_text("utf-8"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = ["id", "semantic", "modifier", "modifier_artist", "modifier_trending",
               "modifier_medium", "modifier_movement", "modifier_flavor", "image", "seconds"]
    rows = data.get("samples", [])
    csv_path = out / "report.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        import csv as _csv

        writer = _csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    spec = {
        "kind": "grouped_bar",
        "metrics": ["semantic", "modifier", "image"],
        "series": [{
            "attack": data.get("attack", "attack"),
            "values": {m: data.get("means", {}).get(m) for m in ["semantic", "modifier", "image"]},
            "upper_bound_image_similarity": data.get("upper_bound_image_similarity"),
        }],
    }
    spec_path = out / "report_bars.json"
    spec_path.write_text(json.dumps(spec, indent=2), encoding="utf-8")
    click.echo(f"wrote {csv_path}\nwrote {spec_path}")
    if render:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3))
        values = spec["series"][0]["values"]
        names = [m for m, v in values.items() if v is not None]
        ax.bar(names, [values[m] for m in names])
        ax.set_ylim(0, 1)
        ax.set_title(data.get("attack", "attack"))
        png_path = out / "report_bars.png"
        fig.tight_layout()
        fig.savefig(png_path)
        click.echo(f"wrote {png_path}")


@main.command()
@config_option
@seed_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(config_path, seed, host, port):
    """Serve the adversary-in-the-loop HTTP API."""
    import uvicorn

    from .service import create_app

    cfg = _load_cfg(config_path)
    checkpoint = cfg.get("service.checkpoint")
    vocab_path = cfg.get("service.vocabulary")
    if not checkpoint or not vocab_path:
        raise click.ClickException("service.checkpoint and service.vocabulary must be set in the config")
    scfg = _stealer_cfg(cfg)
    clf, vocab, _ = _load_clf(checkpoint, vocab_path, scfg.min_count)
    app = create_app(
        cfg,
        caption_model=_caption_model(cfg),
        classifier=clf,
        backend=emb.create_backend(cfg),
        genbackend=gen.create_backend(cfg),
        vocab=vocab,
        stealer_cfg=scfg,
    )
    uvicorn.run(app, host=host, port=port)


@main.command("synth")
@config_option
@seed_option
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--samples", type=int, default=2000, show_default=True)
@click.option("--per-category", type=int, default=10, show_default=True)
@click.option("--size", type=int, default=64, show_default=True)
def synth_cmd(config_path, seed, out_dir, samples, per_category, size):
    """Generate the planted-glyph synthetic dataset (records, images, taxonomy)."""
    out = Path(out_dir)
    modifiers, taxonomy = synth.synthetic_label_space(per_category)
    records = synth.make_planted_records(samples, modifiers, seed=seed, size=(size, size))
    path = synth.write_planted_dataset(records, out)
    tax_dir = out / "taxonomy"
    tax_dir.mkdir(parents=True, exist_ok=True)
    for cat in ("artist", "trending", "medium", "movement"):
        (tax_dir / f"{cat}.txt").write_text(
            "\n".join(sorted(getattr(taxonomy, cat))) + "\n", encoding="utf-8"
        )
    flavors = sorted(m for m in modifiers if m.startswith("flavor"))
    (tax_dir / "flavor.txt").write_text("\n".join(flavors) + "\n", encoding="utf-8")
    click.echo(f"records -> {path}")
    click.echo(f"taxonomy -> {tax_dir}")


if __name__ == "__main__":
    main()
