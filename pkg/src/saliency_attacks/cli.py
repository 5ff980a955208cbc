"""Command-line surface: single attacks, batch suites and report tools."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from saliency_attacks.attacks import AttackConfig
from saliency_attacks.harness import (
    ATTACKS,
    ExperimentSpec,
    compare_paired,
    convergence,
    make_backend,
    read_records,
    run_suite,
    sweep_kint,
)
from saliency_attacks.image import save_image, save_tensor


def _add_attack_flags(p: argparse.ArgumentParser):
    p.add_argument("--attack", choices=ATTACKS, default="saliency")
    p.add_argument("--mode", choices=("salient", "non-salient", "no-saliency"), default="salient")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--phi", type=float, default=0.1)
    p.add_argument("--k-int", type=int, default=16)
    p.add_argument("--budget", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resize", type=int, default=256)


def _add_backend_flags(p: argparse.ArgumentParser):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--weights", type=Path, help="SRW1 weight container")
    group.add_argument("--endpoint", help="remote classifier URL")


def _build_spec(args, dataset_dir, labels_file, output_dir) -> ExperimentSpec:
    config = AttackConfig(
        epsilon=args.epsilon,
        k_int=args.k_int,
        budget=args.budget,
        phi=args.phi,
        mode=args.mode,
        seed=args.seed,
    )
    return ExperimentSpec(
        dataset_dir=Path(dataset_dir),
        labels_file=Path(labels_file),
        attack=args.attack,
        config=config,
        output_dir=Path(output_dir),
        weights_path=args.weights,
        endpoint_url=args.endpoint,
        saliency_dir=args.saliency_dir,
        mad_thresholds=tuple(float(t) for t in args.mad_thresholds.split(",")),
        resize=args.resize,
        workers=args.workers,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="saliency-attacks",
        description="Black-box adversarial attacks restricted to salient regions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="attack a single image")
    p_attack.add_argument("--image", type=Path, required=True)
    p_attack.add_argument("--label", type=int, required=True)
    p_attack.add_argument("--saliency-map", type=Path, help="grayscale map PNG (default: built-in)")
    p_attack.add_argument("--out-dir", type=Path, default=Path("attack_out"))
    _add_backend_flags(p_attack)
    _add_attack_flags(p_attack)

    p_suite = sub.add_parser("suite", help="attack a labeled dataset")
    p_suite.add_argument("--dataset", type=Path, required=True)
    p_suite.add_argument("--labels", type=Path, required=True)
    p_suite.add_argument("--saliency-dir", type=Path, default=None)
    p_suite.add_argument("--mad-thresholds", default="30")
    p_suite.add_argument("--workers", type=int, default=1)
    p_suite.add_argument("--out", type=Path, required=True)
    _add_backend_flags(p_suite)
    _add_attack_flags(p_suite)

    p_conv = sub.add_parser("convergence", help="queries vs true-success-rate curves")
    p_conv.add_argument("--records", type=Path, required=True)
    p_conv.add_argument("--thresholds", default="20,30,40")
    p_conv.add_argument("--out", type=Path, required=True)

    p_sweep = sub.add_parser("sweep-kint", help="aggregate per initial block side")
    p_sweep.add_argument("--dataset", type=Path, required=True)
    p_sweep.add_argument("--labels", type=Path, required=True)
    p_sweep.add_argument("--saliency-dir", type=Path, default=None)
    p_sweep.add_argument("--mad-thresholds", default="30")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--k-list", default="64,32,16")
    p_sweep.add_argument("--out", type=Path, required=True)
    _add_backend_flags(p_sweep)
    _add_attack_flags(p_sweep)

    p_cmp = sub.add_parser("compare", help="paired per-image MAD of two record files")
    p_cmp.add_argument("--records-a", type=Path, required=True)
    p_cmp.add_argument("--records-b", type=Path, required=True)
    p_cmp.add_argument("--out", type=Path, required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "attack":
        from saliency_attacks.harness import dispatch_attack, prepare_image
        from saliency_attacks.metrics import measure

        out_dir = args.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        args.saliency_dir = args.saliency_map.parent if args.saliency_map else None
        args.mad_thresholds = "30"
        args.workers = 1
        labels = out_dir / "_single_labels.csv"
        labels.write_text(f"filename,class_index\n{args.image.name},{args.label}\n")
        spec = _build_spec(args, args.image.parent, labels, out_dir)
        backend = make_backend(spec)
        image_id = args.image.stem
        x = prepare_image(spec, args.image.name)
        outcome = dispatch_attack(spec, backend, x, args.label, image_id)
        report = measure(x, outcome.adversarial)
        save_image(outcome.adversarial, out_dir / f"{image_id}_adv.png")
        save_tensor(outcome.adversarial, out_dir / f"{image_id}_adv.srt1")
        print(
            json.dumps(
                {
                    "image": image_id,
                    "success": outcome.success,
                    "queries": outcome.queries,
                    "best_f": outcome.best_f,
                    "l0_fraction": report.l0_fraction,
                    "l2": report.l2,
                    "linf": report.linf,
                    "mad": report.mad,
                    "adversarial_png": str(out_dir / f"{image_id}_adv.png"),
                },
                indent=2,
            )
        )
        return 0

    if args.command == "suite":
        spec = _build_spec(args, args.dataset, args.labels, args.out)
        records_path, aggregate_path, _ = run_suite(spec)
        print(f"records: {records_path}")
        print(f"aggregates: {aggregate_path}")
        return 0

    if args.command == "convergence":
        records = read_records(args.records)
        thresholds = [float(t) for t in args.thresholds.split(",")]
        convergence(records, thresholds, args.out)
        print(f"curves: {args.out}")
        return 0

    if args.command == "sweep-kint":
        spec = _build_spec(args, args.dataset, args.labels, args.out.parent or Path("."))
        k_list = [int(k) for k in args.k_list.split(",")]
        path = sweep_kint(spec, k_list, args.out)
        print(f"sweep: {path}")
        return 0

    if args.command == "compare":
        fraction = compare_paired(read_records(args.records_a), read_records(args.records_b), args.out)
        print(f"paired: {args.out}")
        print(f"fraction_b_better: {fraction:.6f}")
        return 0

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
