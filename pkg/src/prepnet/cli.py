"""Command-line entry point: synth, train, eval, report.

Results go to files inside the output/run directory; everything printed
by the process itself is diagnostic and goes to stderr. Exit codes:
0 success, 1 bad input (usage, config, manifest), 2 runtime failure.
"""

import argparse
import json
import sys
import traceback
from pathlib import Path

from .data.manifest import load_manifest
from .data.synthetic import (DomainNuisance, SyntheticDomainSpec,
                             default_benchmark_spec, generate_synthetic_benchmark,
                             unseen_domain_spec)
from .errors import PrepNetError, ValidationError
from .evaluation import (EvalBundle, build_eval_matrix, compare_to_baseline,
                         evaluate_unseen, load_bundle, render_tables, save_bundle)
from .training import (TASK_MODES, load_flat_arrays, load_pipeline_models,
                       load_run_config, prepare_arrays, run_pipeline)


def _log(msg):
    print(msg, file=sys.stderr)


def _parse_size(text):
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValidationError(f"--size must look like HxW, got '{text}'")
    try:
        h, w = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValidationError(f"--size must look like HxW, got '{text}'") from None
    if h <= 0 or w <= 0:
        raise ValidationError(f"--size must be positive, got '{text}'")
    return (h, w)


def _site_table(count):
    """First three sites are the canonical benchmark trio; the rest get
    procedurally spread nuisance parameters (distinct gammas)."""
    sites = list(default_benchmark_spec().domains + unseen_domain_spec().domains)
    for i in range(len(sites), count):
        name = f"site{chr(ord('A') + i)}" if i < 26 else f"site{i}"
        sites.append(DomainNuisance(
            name=name,
            gamma=round(0.7 + 0.09 * i, 4),
            gain=round(0.9 + 0.04 * (i % 5), 4),
            offset=round(0.03 * (i % 4), 4),
            noise_sigma=round(0.015 + 0.007 * (i % 3), 4)))
    return tuple(sites[:count])


def cmd_synth(args):
    size = _parse_size(args.size)
    if args.domains < 1:
        raise ValidationError(f"--domains must be at least 1, got {args.domains}")
    base = default_benchmark_spec(image_size=size)
    spec = SyntheticDomainSpec(
        domains=_site_table(args.domains),
        image_size=size,
        blob_radius=base.blob_radius,
        blob_amplitude=base.blob_amplitude,
        samples_per_stratum=args.per_domain)
    manifest = generate_synthetic_benchmark(spec, args.out, args.seed)
    _log(f"wrote {len(manifest.entries)} images across {spec.domain_count} domains to {args.out}")
    return 0


def cmd_train(args):
    config_path = Path(args.config)
    config, text = load_run_config(config_path)
    manifest_path = Path(config.manifest)
    if not manifest_path.is_absolute():
        manifest_path = config_path.parent / manifest_path
    result = run_pipeline(config, args.out, manifest_path=manifest_path,
                          force=args.force, seed_override=args.seed, config_text=text)
    for stage, s in sorted(result.summaries.items()):
        bits = " ".join(
            f"{k}={v:.4f}" if isinstance(v, float) else f"{k}.val_ba={v['val_ba_best']:.4f}"
            for k, v in sorted(s.metrics.items()))
        flag = " (stopped early)" if s.stopped_early else ""
        _log(f"stage {stage} {s.name}: {s.epochs_run} epochs{flag} {bits}".rstrip())
    if result.flagged:
        _log(f"flagged {len(result.flagged)} suspect training samples; see metrics/artifacts.json")
    _log(f"run complete: {result.run_dir}")
    return 0


def cmd_eval(args):
    if not args.matrix:
        raise ValidationError("eval requires --matrix")
    run_dir = Path(args.run)
    state_path = run_dir / "state.json"
    if not state_path.exists():
        raise ValidationError(f"{run_dir} is not a run directory (no state.json)")
    state = json.loads(state_path.read_text(encoding="utf-8"))
    config, _ = load_run_config(run_dir / "config.json")
    models = load_pipeline_models(run_dir, config=config)

    manifest = load_manifest(state.get("manifest_path", config.manifest))
    arrays = prepare_arrays(manifest, config.preprocess, config.train.split_ratios,
                            int(state["seed"]))
    test = arrays["test"]
    if len(test) == 0:
        raise ValidationError("test split is empty; nothing to evaluate")

    matrices = {m: build_eval_matrix(models, test, manifest.dataset_names, m)
                for m in TASK_MODES}
    comparisons = (
        compare_to_baseline(matrices["autoencoder"], matrices["raw"], "autoencoder", "raw"),
        compare_to_baseline(matrices["prepnet"], matrices["raw"], "prepnet", "raw"))
    unseen = None
    if args.unseen is not None:
        um = load_manifest(args.unseen)
        flat = load_flat_arrays(um, config.preprocess)
        name = um.dataset_names[0] if len(um.dataset_names) == 1 else "unseen"
        unseen = evaluate_unseen(models, flat.images, flat.labels, dataset_name=name)

    bundle = EvalBundle(matrices=matrices, comparisons=comparisons, unseen=unseen)
    out = run_dir / "metrics" / "matrix.json"
    save_bundle(bundle, out)
    for m in TASK_MODES:
        mx = matrices[m]
        _log(f"{m}: within {mx.within_average:.4f} cross {mx.cross_average:.4f}")
    for c in comparisons:
        _log(f"{c.candidate} vs {c.baseline}: within {c.delta_within_pp:+.2f} pp "
             f"cross {c.delta_cross_pp:+.2f} pp")
    if unseen is not None:
        for row in unseen.rows:
            _log(f"unseen[{unseen.dataset}] {row.preprocessing}: BA {row.ba:.4f} "
                 f"({row.delta_ba_pp:+.2f} pp)")
    _log(f"wrote {out}")
    return 0


def cmd_report(args):
    run_dir = Path(args.run)
    bundle = load_bundle(run_dir / "metrics" / "matrix.json")
    fmt = "markdown" if args.format == "md" else "csv"
    out = run_dir / f"report.{args.format}"
    out.write_text(render_tables(bundle, fmt), encoding="utf-8")
    _log(f"wrote {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="prepnet",
        description="Adversarial image homogenization: benchmark synthesis, "
                    "training, cross-dataset evaluation, and reporting.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{synth,train,eval,report}")

    p = sub.add_parser("synth", help="generate the synthetic multi-domain benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True, help="generator seed")
    p.add_argument("--domains", type=int, required=True, help="number of domains")
    p.add_argument("--per-domain", type=int, required=True, dest="per_domain",
                   help="samples per domain-class stratum")
    p.add_argument("--size", default="32x32", help="image size HxW (default 32x32)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run the four-stage training pipeline")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=None,
                   help="seed override (beats PREPNET_SEED and the config)")
    p.add_argument("--force", action="store_true",
                   help="restart a completed run from scratch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a completed run")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--matrix", action="store_true",
                   help="build the full train-domain x test-domain matrix")
    p.add_argument("--unseen", default=None, metavar="MANIFEST",
                   help="also evaluate on a held-out domain manifest")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render evaluation results to a table file")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--format", required=True, choices=("csv", "md"))
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return 1
    except (PrepNetError, OSError) as exc:
        _log(f"error: {exc}")
        return 2
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
