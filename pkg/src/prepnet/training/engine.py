"""Four-stage training pipeline.

Stage 1 pretrains the autoencoder on reconstruction alone. Stage 2
warms up the dataset classifier on (frozen) reconstructions so the
adversarial game starts against a competent opponent. Stage 3
alternates one discriminator step and one generator step per batch:
the dataset classifier keeps refitting the reconstructions while the
autoencoder is pushed toward outputs whose origin it cannot predict.
Stage 4 finally trains task classifiers on the homogenized images,
plus raw-image and pretrained-autoencoder baselines for comparison.

Every stage draws data order from its own seeded stream, so a run is
reproducible end to end and a resumed run continues exactly where the
interrupted one would have been.
"""

import json
import os
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import losses
from ..data.manifest import load_image, load_manifest, split_dataset
from ..data.preprocess import preprocess_image
from ..errors import ConfigError, TrainingError, ValidationError
from ..metrics import compute_report
from ..models.autoencoder import build_autoencoder
from ..models.checkpoint import (load_checkpoint, load_into, save_checkpoint,
                                 weights_from_params)
from ..models.classifiers import (build_dataset_classifier, build_task_classifier,
                                  classify_dataset, classify_task)
from ..models.config import config_hash, make_model_config
from ..nn import ops
from ..nn.layers import param_bytes_hash, prefix_params, set_requires_grad
from ..nn.optim import AdamW
from ..nn.tensor import Tensor
from .artifacts import flag_artifacts
from .config import RunConfig, save_run_config
from .early_stop import EarlyStopper

SEED_ENV_VAR = "PREPNET_SEED"
TASK_MODES = ("raw", "autoencoder", "prepnet")

# per-stage data-order streams; model init uses streams 0-3 (see models)
_S1, _S2, _S3, _S4 = 11, 12, 13, 14


@dataclass
class SplitArrays:
    images: np.ndarray   # (N, H, W) float32 in [0, 1]
    labels: np.ndarray   # (N,) int64
    domains: np.ndarray  # (N,) int64
    sample_ids: tuple

    def __len__(self):
        return len(self.images)


@dataclass
class StageSummary:
    stage: int
    name: str
    epochs_run: int
    stopped_early: bool
    metrics: dict


@dataclass
class PipelineModels:
    config: object
    autoencoder_stage1: object
    autoencoder: object
    dataset_classifier: object
    task_classifiers: dict  # (mode, dataset_id) -> model


@dataclass
class PipelineResult:
    run_dir: Path
    seed: int
    domain_names: tuple
    summaries: dict
    arrays: dict
    models: PipelineModels
    flagged: list = field(default_factory=list)


class JsonlLogger:
    """Append-only JSON-lines log; one record per epoch per stage."""

    def __init__(self, path):
        self.path = Path(path)
        self._seq = 0

    def log(self, record):
        record = {"seq": self._seq, **record}
        self._seq += 1
        with open(self.path, "a", encoding="utf-8") as fh:
            json.dump(record, fh, sort_keys=True)
            fh.write("\n")


def _truncate_log(path, keep_stages):
    """Drop records from stages being rerun, keep the rest. Returns the
    next sequence number."""
    path = Path(path)
    if not path.exists():
        return 0
    kept = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("stage") in keep_stages:
            kept.append(line)
    path.write_text("".join(l + "\n" for l in kept), encoding="utf-8")
    return max((json.loads(l)["seq"] for l in kept), default=-1) + 1


def _check_finite(value, stage, epoch, step):
    if not np.isfinite(value):
        raise TrainingError(
            f"stage {stage}: non-finite loss {value!r} at epoch {epoch} step {step}")
    return float(value)


def _snapshot(named_params):
    return {name: t.data.copy() for name, t in named_params}


def _restore(named_params, snap):
    for name, t in named_params:
        t.data[...] = snap[name]


def _batched(n, batch_size):
    return [(s, min(s + batch_size, n)) for s in range(0, n, batch_size)]


def _reconstruct_all(ae, images, batch_size=64):
    """Forward the full array without building tape."""
    named = ae.named_params()
    set_requires_grad(named, False)
    try:
        outs = []
        for s, e in _batched(len(images), batch_size):
            outs.append(ae.forward(Tensor(images[s:e][:, None])).data[:, 0])
        return np.concatenate(outs)
    finally:
        set_requires_grad(named, True)


def _disc_accuracy(model, images, domains, batch_size=64):
    named = model.named_params()
    set_requires_grad(named, False)
    try:
        hits = 0
        for s, e in _batched(len(images), batch_size):
            logits = classify_dataset(model, images[s:e])
            hits += int(np.sum(logits.argmax(axis=1) == domains[s:e]))
        return hits / len(images)
    finally:
        set_requires_grad(named, True)


def _task_scores(model, images, batch_size=64):
    named = model.named_params()
    set_requires_grad(named, False)
    try:
        outs = []
        for s, e in _batched(len(images), batch_size):
            outs.append(classify_task(model, images[s:e]))
        return np.concatenate(outs)
    finally:
        set_requires_grad(named, True)


# the evaluation harness shares these tape-free batch helpers
reconstruct_dataset = _reconstruct_all
task_scores = _task_scores


def prepare_arrays(manifest, preprocess_config, split_ratios, seed):
    """Resize/equalize every image and group by split.

    Normalization is deliberately left out here: the autoencoder works
    in [0, 1] and both classifiers normalize inside their forward pass.
    """
    splits = {e.split for e in manifest.entries}
    if splits == {None}:
        manifest = split_dataset(manifest, split_ratios, seed=seed)
    elif None in splits:
        raise ValidationError("manifest mixes split-annotated and unannotated entries")
    identity = replace(preprocess_config, norm_mean=0.0, norm_std=1.0)
    arrays = {}
    for split in ("train", "val", "test"):
        sub = manifest.subset(split=split)
        if len(sub.entries) == 0:
            arrays[split] = SplitArrays(
                images=np.zeros((0,) + preprocess_config.target_size, dtype=np.float32),
                labels=np.zeros(0, dtype=np.int64), domains=np.zeros(0, dtype=np.int64),
                sample_ids=())
            continue
        imgs = np.stack([
            preprocess_image(load_image(manifest.resolve(e)), identity) for e in sub.entries
        ]).astype(np.float32)
        arrays[split] = SplitArrays(
            images=imgs,
            labels=np.array([e.label for e in sub.entries], dtype=np.int64),
            domains=np.array([e.dataset_id for e in sub.entries], dtype=np.int64),
            sample_ids=tuple(e.sample_id for e in sub.entries))
    if len(arrays["train"]) == 0 or len(arrays["val"]) == 0:
        raise ValidationError("train and val splits must be non-empty")
    return arrays


def load_flat_arrays(manifest, preprocess_config):
    """Preprocess every manifest entry, ignoring split annotations."""
    if len(manifest.entries) == 0:
        raise ValidationError("manifest has no entries")
    identity = replace(preprocess_config, norm_mean=0.0, norm_std=1.0)
    imgs = np.stack([
        preprocess_image(load_image(manifest.resolve(e)), identity) for e in manifest.entries
    ]).astype(np.float32)
    return SplitArrays(
        images=imgs,
        labels=np.array([e.label for e in manifest.entries], dtype=np.int64),
        domains=np.array([e.dataset_id for e in manifest.entries], dtype=np.int64),
        sample_ids=tuple(e.sample_id for e in manifest.entries))


def run_stage1(ae, arrays, cfg, logger):
    """Autoencoder pretraining; retains the best-validation weights."""
    tcfg = cfg.train
    tr, va = arrays["train"], arrays["val"]
    named = ae.named_params()
    opt = AdamW(named, lr=tcfg.lr_pretrain, betas=(tcfg.beta1, tcfg.beta2),
                weight_decay=tcfg.weight_decay)
    rng = np.random.default_rng([tcfg.seed, _S1])
    best_rec = float(np.mean((_reconstruct_all(ae, va.images) - va.images) ** 2))
    best_weights = _snapshot(named)
    n = len(tr)
    for epoch in range(tcfg.epochs_pretrain):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        total = 0.0
        for step, (s, e) in enumerate(_batched(n, tcfg.batch_size)):
            idx = order[s:e]
            x = Tensor(tr.images[idx][:, None])
            loss = losses.loss_rec(x.data, ae.forward(x), reduction="mean")
            value = _check_finite(float(loss.data), 1, epoch, step)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
        val_rec = float(np.mean((_reconstruct_all(ae, va.images) - va.images) ** 2))
        if val_rec < best_rec:
            best_rec = val_rec
            best_weights = _snapshot(named)
        logger.log({"stage": 1, "epoch": epoch,
                    "losses": {"rec": total / n, "total": total / n},
                    "metrics": {"val_rec": val_rec},
                    "wall": time.perf_counter() - t0})
    _restore(named, best_weights)
    return StageSummary(stage=1, name="pretrain", epochs_run=tcfg.epochs_pretrain,
                        stopped_early=False,
                        metrics={"val_rec": best_rec})


def run_stage2(ae, disc, arrays, cfg, logger):
    """Dataset-classifier warmup against frozen reconstructions."""
    tcfg = cfg.train
    tr, va = arrays["train"], arrays["val"]
    ae_named = ae.named_params()
    set_requires_grad(ae_named, False)
    try:
        tr_recon = _reconstruct_all(ae, tr.images)
        va_recon = _reconstruct_all(ae, va.images)
        inputs = tr.images if tcfg.warmup_on_raw else tr_recon
        named = disc.named_params()
        opt = AdamW(named, lr=tcfg.lr_warmup, betas=(tcfg.beta1, tcfg.beta2),
                    weight_decay=tcfg.weight_decay)
        rng = np.random.default_rng([tcfg.seed, _S2])
        n = len(tr)
        acc = _disc_accuracy(disc, va_recon, va.domains)
        for epoch in range(tcfg.epochs_warmup):
            t0 = time.perf_counter()
            order = rng.permutation(n)
            total = 0.0
            for step, (s, e) in enumerate(_batched(n, tcfg.batch_size)):
                idx = order[s:e]
                logits = disc.forward(Tensor(inputs[idx][:, None]))
                loss = losses.loss_pseu(tr.domains[idx], logits)
                value = _check_finite(float(loss.data), 2, epoch, step)
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += value * len(idx)
            acc = _disc_accuracy(disc, va_recon, va.domains)
            logger.log({"stage": 2, "epoch": epoch,
                        "losses": {"pseu": total / n},
                        "metrics": {"disc_acc_val": acc},
                        "wall": time.perf_counter() - t0})
        return StageSummary(stage=2, name="warmup", epochs_run=tcfg.epochs_warmup,
                            stopped_early=False, metrics={"disc_acc_val": acc})
    finally:
        set_requires_grad(ae_named, True)


def run_stage3(ae, disc, arrays, cfg, logger, domain_count):
    """Adversarial alternation: one discriminator step, one generator
    step per batch."""
    tcfg = cfg.train
    w = tcfg.loss_weights
    tr, va = arrays["train"], arrays["val"]
    ae_named = ae.named_params()
    disc_named = disc.named_params()
    k = int(domain_count)
    chance = 1.0 / k
    opt_g = AdamW(ae_named, lr=tcfg.lr_generator, betas=(tcfg.beta1, tcfg.beta2),
                  weight_decay=tcfg.weight_decay)
    opt_d = AdamW(disc_named, lr=tcfg.lr_discriminator, betas=(tcfg.beta1, tcfg.beta2),
                  weight_decay=tcfg.weight_decay)
    stopper = EarlyStopper(chance=chance, band=0.05, patience=tcfg.early_stop_patience)
    rng = np.random.default_rng([tcfg.seed, _S3])
    rec_pre = float(np.mean((_reconstruct_all(ae, va.images) - va.images) ** 2))
    n = len(tr)
    acc = _disc_accuracy(disc, _reconstruct_all(ae, va.images), va.domains)
    rec_post = rec_pre
    stopped = False
    epochs_run = 0
    for epoch in range(tcfg.epochs_adversarial):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        d_total = rec_total = fool_total = 0.0
        for step, (s, e) in enumerate(_batched(n, tcfg.batch_size)):
            idx = order[s:e]
            x = Tensor(tr.images[idx][:, None])
            xhat = ae.forward(x)
            # discriminator step on detached reconstructions
            d_loss = losses.loss_pseu(tr.domains[idx], disc.forward(Tensor(xhat.data)))
            d_value = _check_finite(float(d_loss.data), 3, epoch, step)
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
            # generator step through the frozen, just-updated classifier
            set_requires_grad(disc_named, False)
            try:
                rec_t = losses.loss_rec(x.data, xhat, reduction="mean")
                fool_t = losses.loss_fool(disc.forward(xhat), k=k)
                g_loss = ops.add_scalars([ops.scale(rec_t, w.w_rec), ops.scale(fool_t, w.w_fool)])
                _check_finite(float(g_loss.data), 3, epoch, step)
                opt_g.zero_grad()
                g_loss.backward()
                opt_g.step()
            finally:
                set_requires_grad(disc_named, True)
            d_total += d_value * len(idx)
            rec_total += float(rec_t.data) * len(idx)
            fool_total += float(fool_t.data) * len(idx)
        va_recon = _reconstruct_all(ae, va.images)
        acc = _disc_accuracy(disc, va_recon, va.domains)
        rec_post = float(np.mean((va_recon - va.images) ** 2))
        breakdown = losses.make_breakdown(rec=rec_total / n, pseu=d_total / n, covid=0.0,
                                          fool=fool_total / n, weights=w)
        logger.log({"stage": 3, "epoch": epoch,
                    "losses": {"rec": breakdown.rec, "pseu": breakdown.pseu,
                               "fool": breakdown.fool,
                               "g_total": w.w_rec * breakdown.rec + w.w_fool * breakdown.fool},
                    "metrics": {"disc_acc_val": acc, "val_rec": rec_post},
                    "wall": time.perf_counter() - t0})
        epochs_run = epoch + 1
        if stopper.update(acc):
            stopped = True
            break
    if acc > 1.0 - (1.0 - chance) * 0.2:
        warnings.warn(
            f"adversarial stage ended with dataset-classifier accuracy {acc:.3f}; "
            "domains are still separable and homogenization is incomplete", stacklevel=2)
    if acc < chance - 0.25:
        warnings.warn(
            f"dataset-classifier accuracy {acc:.3f} fell far below chance {chance:.3f}; "
            "the discriminator may have collapsed", stacklevel=2)
    return StageSummary(stage=3, name="adversarial", epochs_run=epochs_run,
                        stopped_early=stopped,
                        metrics={"disc_acc_val": acc, "val_rec_pre": rec_pre,
                                 "val_rec_post": rec_post})


def train_task_classifier(images, labels, val_images, val_labels, model_config, cfg,
                          init_seed, data_stream, logger=None, tag=None, epochs=None):
    """Train one binary task classifier, retaining best-validation-BA
    weights. Returns (model, best_val_ba, final_val_ba)."""
    tcfg = cfg.train
    epochs = tcfg.epochs_task if epochs is None else epochs
    if len(np.unique(labels)) < 2:
        raise ValidationError(
            f"task training data {tag or ''} contains a single class; need both labels")
    if len(np.unique(val_labels)) < 2:
        raise ValidationError(
            f"task validation data {tag or ''} contains a single class; need both labels")
    model = build_task_classifier(model_config, seed=init_seed,
                                  norm_mean=cfg.preprocess.norm_mean,
                                  norm_std=cfg.preprocess.norm_std)
    named = model.named_params()
    opt = AdamW(named, lr=tcfg.lr_task, betas=(tcfg.beta1, tcfg.beta2),
                weight_decay=tcfg.weight_decay)
    rng = np.random.default_rng(data_stream)
    n = len(images)
    targets = labels.astype(np.float64).reshape(-1, 1)
    best_ba = compute_report(val_labels, _task_scores(model, val_images)).ba
    best_weights = _snapshot(named)
    final_ba = best_ba
    for epoch in range(epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        total = 0.0
        for step, (s, e) in enumerate(_batched(n, tcfg.batch_size)):
            idx = order[s:e]
            probs = ops.sigmoid(model.forward(Tensor(images[idx][:, None])))
            loss = losses.loss_covid(targets[idx], probs)
            value = _check_finite(float(loss.data), 4, epoch, step)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
        final_ba = compute_report(val_labels, _task_scores(model, val_images)).ba
        if final_ba > best_ba:
            best_ba = final_ba
            best_weights = _snapshot(named)
        if logger is not None:
            rec = {"stage": 4, "epoch": epoch, "losses": {"covid": total / n},
                   "metrics": {"val_ba": final_ba}, "wall": time.perf_counter() - t0}
            if tag:
                rec["classifier"] = tag
            logger.log(rec)
    _restore(named, best_weights)
    return model, best_ba, final_ba


def run_stage4(ae_stage1, ae_final, arrays, cfg, model_config, logger):
    """Task classifiers per preprocessing mode per training dataset."""
    tr, va = arrays["train"], arrays["val"]
    inputs = {
        "raw": (tr.images, va.images),
        "autoencoder": (_reconstruct_all(ae_stage1, tr.images),
                        _reconstruct_all(ae_stage1, va.images)),
        "prepnet": (_reconstruct_all(ae_final, tr.images),
                    _reconstruct_all(ae_final, va.images)),
    }
    domains = sorted(set(tr.domains.tolist()))
    classifiers = {}
    metrics = {}
    for m_idx, mode in enumerate(TASK_MODES):
        tr_x, va_x = inputs[mode]
        for ds in domains:
            sel = tr.domains == ds
            vsel = va.domains == ds
            tag = f"{mode}.d{ds}"
            init_seed = cfg.train.seed * 100 + m_idx * 10 + ds
            model, best_ba, final_ba = train_task_classifier(
                tr_x[sel], tr.labels[sel], va_x[vsel], va.labels[vsel], model_config, cfg,
                init_seed=init_seed, data_stream=[cfg.train.seed, _S4, m_idx, ds],
                logger=logger, tag=tag)
            classifiers[(mode, ds)] = model
            metrics[tag] = {"val_ba_best": best_ba, "val_ba_final": final_ba}
    return StageSummary(stage=4, name="task", epochs_run=cfg.train.epochs_task,
                        stopped_early=False, metrics=metrics), classifiers


def _clear_run_dir(run_dir):
    for name in ("config.json", "logs.jsonl", "state.json"):
        p = run_dir / name
        if p.exists():
            p.unlink()
    for sub in ("checkpoints", "metrics"):
        d = run_dir / sub
        if d.is_dir():
            for p in sorted(d.iterdir()):
                if p.is_file():
                    p.unlink()


def _write_state(run_dir, state):
    with open(run_dir / "state.json", "w", encoding="utf-8") as fh:
        json.dump(state, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _save_stage_checkpoint(run_dir, stage, named, cfg_hash, meta):
    weights = weights_from_params(named, cfg_hash, meta=meta)
    save_checkpoint(weights, run_dir / "checkpoints" / f"stage{stage}.ckpt")


def resolve_model_config(run_config, domain_count):
    overrides = dict(run_config.model)
    backbone = overrides.pop("backbone_name", "vgg-mini")
    if "dataset_head" in overrides:
        head = overrides["dataset_head"]
        if int(head[1]) != domain_count:
            raise ConfigError(
                f"dataset_head declares {head[1]} domains but the manifest has {domain_count}")
    if "input_size" in overrides:
        size = tuple(int(v) for v in overrides.pop("input_size"))
        if size != tuple(run_config.preprocess.target_size):
            raise ConfigError(
                f"model input_size {size} must match preprocess target_size "
                f"{tuple(run_config.preprocess.target_size)}")
    for key in ("encoder_blocks", "dataset_head", "task_head"):
        if key in overrides:
            overrides[key] = tuple(
                tuple(v) if isinstance(v, list) else v for v in overrides[key])
    return make_model_config(backbone=backbone, domain_count=domain_count,
                             input_size=tuple(run_config.preprocess.target_size), **overrides)


def effective_seed(config, seed_override=None):
    """--seed flag beats the PREPNET_SEED variable beats the config."""
    if seed_override is not None:
        return int(seed_override)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ValidationError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return config.train.seed


def run_pipeline(config, out_dir, manifest_path=None, force=False, seed_override=None,
                 config_text=None):
    """Execute all four stages into a run directory.

    The directory receives config.json (verbatim copy of the input
    config when given), checkpoints/stage{1..4}.ckpt, logs.jsonl,
    metrics/, and state.json. A directory holding a completed run is
    only rerun with force=True; an incomplete one resumes after its
    last finished stage.
    """
    run_dir = Path(out_dir)
    state_path = run_dir / "state.json"
    seed = effective_seed(config, seed_override)
    resume_from = 0
    if state_path.exists():
        state = json.loads(state_path.read_text(encoding="utf-8"))
        if state.get("status") == "complete" and not force:
            raise ValidationError(
                f"run directory {run_dir} already holds a completed run; pass --force to restart")
        if force or not (run_dir / "config.json").exists():
            _clear_run_dir(run_dir)
        else:
            stored = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
            if RunConfig.from_dict(stored) != config:
                raise ValidationError(
                    "config does not match the one stored in the run directory; "
                    "use force to start over")
            if int(state.get("seed", seed)) != seed:
                raise ValidationError(
                    f"seed {seed} does not match the interrupted run's seed "
                    f"{state.get('seed')}; use force to start over")
            resume_from = min(3, max(state.get("completed_stages", [0]) or [0]))
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)
    (run_dir / "metrics").mkdir(exist_ok=True)
    if resume_from == 0:
        if config_text is not None:
            (run_dir / "config.json").write_text(config_text, encoding="utf-8")
        else:
            save_run_config(config, run_dir / "config.json")
        (run_dir / "logs.jsonl").write_text("", encoding="utf-8")

    config = replace(config, train=replace(config.train, seed=seed))
    manifest_path = Path(manifest_path if manifest_path is not None else config.manifest)
    manifest = load_manifest(manifest_path)
    if manifest.domain_count < 2:
        raise ValidationError(
            f"adversarial training needs at least two datasets, manifest has {manifest.domain_count}")
    arrays = prepare_arrays(manifest, config.preprocess, config.train.split_ratios, seed)
    model_config = resolve_model_config(config, manifest.domain_count)
    cfg_hash = config_hash(model_config)

    completed = list(range(1, resume_from + 1))
    state = {"status": "incomplete", "completed_stages": completed, "seed": seed,
             "model_config_hash": cfg_hash,
             "manifest_path": str(manifest_path.resolve())}
    _write_state(run_dir, state)
    logger = JsonlLogger(run_dir / "logs.jsonl")
    logger._seq = _truncate_log(run_dir / "logs.jsonl", set(completed) & {1, 2, 3})

    ae = build_autoencoder(model_config, seed=seed)
    disc = build_dataset_classifier(model_config, seed=seed,
                                    norm_mean=config.preprocess.norm_mean,
                                    norm_std=config.preprocess.norm_std)
    ae_named = ae.named_params()
    disc_named = prefix_params("et", disc.named_params())
    ckpt_dir = run_dir / "checkpoints"
    if resume_from >= 1:
        load_into(ae_named, load_checkpoint(ckpt_dir / "stage1.ckpt", cfg_hash))
    if resume_from >= 2:
        load_into(disc_named, load_checkpoint(ckpt_dir / "stage2.ckpt", cfg_hash))
    if resume_from >= 3:
        merged = load_checkpoint(ckpt_dir / "stage3.ckpt", cfg_hash)
        load_into(ae_named + disc_named, merged)

    summaries = {}
    flagged_records = []

    def advance(stage):
        completed.append(stage)
        state["completed_stages"] = sorted(set(completed))
        _write_state(run_dir, state)

    if resume_from < 1:
        summaries[1] = run_stage1(ae, arrays, config, logger)
        _save_stage_checkpoint(run_dir, 1, ae_named, cfg_hash,
                               meta={"stage": "pretrain", **summaries[1].metrics})
        tr = arrays["train"]
        recon = _reconstruct_all(ae, tr.images)
        per_sample = np.mean((recon - tr.images) ** 2, axis=(1, 2))
        idx = flag_artifacts(per_sample, config.train.artifact_threshold_multiplier)
        threshold = float(per_sample.mean()
                          + config.train.artifact_threshold_multiplier * per_sample.std())
        flagged_records = [
            {"index": int(i), "sample_id": tr.sample_ids[int(i)], "loss": float(per_sample[i])}
            for i in idx
        ]
        with open(run_dir / "metrics" / "artifacts.json", "w", encoding="utf-8") as fh:
            json.dump({"multiplier": config.train.artifact_threshold_multiplier,
                       "threshold": threshold, "flagged": flagged_records},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        if flagged_records:
            warnings.warn(
                f"{len(flagged_records)} training sample(s) reconstruct far above the "
                f"cohort statistics; inspect metrics/artifacts.json", stacklevel=2)
        advance(1)

    if resume_from < 2:
        summaries[2] = run_stage2(ae, disc, arrays, config, logger)
        _save_stage_checkpoint(run_dir, 2, disc_named, cfg_hash,
                               meta={"stage": "warmup", **summaries[2].metrics})
        advance(2)

    if resume_from < 3:
        summaries[3] = run_stage3(ae, disc, arrays, config, logger, manifest.domain_count)
        _save_stage_checkpoint(run_dir, 3, ae_named + disc_named, cfg_hash,
                               meta={"stage": "adversarial", **summaries[3].metrics})
        advance(3)

    ae_stage1 = build_autoencoder(model_config, seed=seed)
    load_into(ae_stage1.named_params(), load_checkpoint(ckpt_dir / "stage1.ckpt", cfg_hash))
    summaries[4], classifiers = run_stage4(ae_stage1, ae, arrays, config, model_config, logger)
    task_named = []
    for (mode, ds), model in sorted(classifiers.items()):
        task_named.extend(prefix_params(f"task.{mode}.d{ds}", model.named_params()))
    _save_stage_checkpoint(run_dir, 4, task_named, cfg_hash,
                           meta={"stage": "task", **summaries[4].metrics})
    advance(4)

    summary_payload = {
        str(k): {"name": v.name, "epochs_run": v.epochs_run,
                 "stopped_early": v.stopped_early, "metrics": v.metrics}
        for k, v in summaries.items()
    }
    with open(run_dir / "metrics" / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary_payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    state["status"] = "complete"
    _write_state(run_dir, state)

    models = PipelineModels(config=model_config, autoencoder_stage1=ae_stage1, autoencoder=ae,
                            dataset_classifier=disc, task_classifiers=classifiers)
    return PipelineResult(run_dir=run_dir, seed=seed, domain_names=manifest.dataset_names,
                          summaries=summaries, arrays=arrays, models=models,
                          flagged=flagged_records)


def load_pipeline_models(run_dir, config=None):
    """Rebuild every model of a completed run from its checkpoints."""
    run_dir = Path(run_dir)
    state_path = run_dir / "state.json"
    if not state_path.exists():
        raise ValidationError(f"{run_dir} is not a run directory (no state.json)")
    state = json.loads(state_path.read_text(encoding="utf-8"))
    if state.get("status") != "complete":
        raise ValidationError(f"run in {run_dir} is incomplete; finish training first")
    if config is None:
        from .config import load_run_config
        config, _ = load_run_config(run_dir / "config.json")
    seed = int(state["seed"])
    ckpt_dir = run_dir / "checkpoints"
    stage4 = load_checkpoint(ckpt_dir / "stage4.ckpt")
    heads = sorted({tuple(name.split(".")[:3]) for name in stage4.tensors
                    if name.startswith("task.")})
    pairs = [(mode, int(d[1:])) for _, mode, d in heads]
    domain_count = len({ds for _, ds in pairs})
    model_config = resolve_model_config(config, domain_count)
    cfg_hash = config_hash(model_config)

    ae_stage1 = build_autoencoder(model_config, seed=seed)
    load_into(ae_stage1.named_params(), load_checkpoint(ckpt_dir / "stage1.ckpt", cfg_hash))
    ae = build_autoencoder(model_config, seed=seed)
    disc = build_dataset_classifier(model_config, seed=seed,
                                    norm_mean=config.preprocess.norm_mean,
                                    norm_std=config.preprocess.norm_std)
    merged = load_checkpoint(ckpt_dir / "stage3.ckpt", cfg_hash)
    load_into(ae.named_params() + prefix_params("et", disc.named_params()), merged)

    classifiers = {}
    for mode, ds in pairs:
        model = build_task_classifier(model_config, seed=0,
                                      norm_mean=config.preprocess.norm_mean,
                                      norm_std=config.preprocess.norm_std)
        named = prefix_params(f"task.{mode}.d{ds}", model.named_params())
        sub = {n: stage4.tensors[n] for n in stage4.tensors
               if n.startswith(f"task.{mode}.d{ds}.")}
        partial = type(stage4)(tensors=sub, config_hash=stage4.config_hash,
                               format_version=stage4.format_version, meta=stage4.meta)
        load_into(named, partial)
        classifiers[(mode, ds)] = model
    return PipelineModels(config=model_config, autoencoder_stage1=ae_stage1, autoencoder=ae,
                          dataset_classifier=disc, task_classifiers=classifiers)


def component_hashes(models):
    """Stable content hashes of each component's parameters."""
    out = {
        "autoencoder": param_bytes_hash(models.autoencoder.named_params()),
        "dataset_classifier": param_bytes_hash(models.dataset_classifier.named_params()),
    }
    for (mode, ds), model in sorted(models.task_classifiers.items()):
        out[f"task.{mode}.d{ds}"] = param_bytes_hash(model.named_params())
    return out
