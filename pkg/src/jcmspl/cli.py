"""Command-line front end.

Subcommands: ``train`` (fit a model from a manifest), ``eval``
(standard, top-K or generalized scoring of a saved model), ``ablate``
(train and score the variant ladder) and ``synth`` (generate the
planted-model benchmark).

Exit codes: 0 success, 2 invalid configuration, 3 data errors,
4 numerical failures during training, 5 model/dataset mismatches at
evaluation time.  All outputs are deterministic: the same flags on the
same inputs reproduce every file byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .archive import fingerprint_dataset, load_model, save_model
from .dataset import (
    NORMALIZE_MODES,
    SynthSpec,
    ZslDataset,
    load_manifest,
    normalize,
    save_manifest,
    synth_generate,
)
from .errors import (
    AllZeroNormError,
    ArchiveError,
    DatasetError,
    DimensionMismatchError,
    EmptyCandidatesError,
    InvalidFractionError,
    InvalidHyperparamsError,
    InvalidKError,
    InvalidSpecError,
    JcmsplError,
    OutOfRangeError,
    UnsupportedVariantError,
)
from .recognizer import (
    DIRECTIONS,
    DISTANCES,
    eval_generalized,
    eval_hit_at_k,
    eval_standard,
)
from .trainer import (
    VARIANTS,
    Hyperparams,
    JcmsplModel,
    fit,
    write_trace_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAIN = 4
EXIT_EVAL = 5

# published per-dataset regularization presets
PRESETS = {
    "awa": {"lambda1": 1e-3, "lambda2": 1e3, "lambda3": 1e7, "lambda4": 1e2},
    "cub": {"lambda1": 1.0, "lambda2": 1e-3, "lambda3": 1e4, "lambda4": 1e-1},
    "sun": {"lambda1": 1e-4, "lambda2": 1e-2, "lambda3": 1e-4, "lambda4": 1e-4},
    "imnet": {"lambda1": 1e-5, "lambda2": 1e-5, "lambda3": 1e1, "lambda4": 1e-4},
}

ABLATION_ORDER = ("fpl", "ipl", "jcmspl0", "jcmspl1", "full")


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _build_hyper(args, variant: str) -> Hyperparams:
    values = {"lambda1": 1.0, "lambda2": 1.0, "lambda3": 1.0, "lambda4": 1.0}
    if args.preset is not None:
        values.update(PRESETS[args.preset])
    for name in values:
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag  # explicit flag beats the preset
    k = args.k
    if k is None:
        if variant != "fpl":
            raise CommandError(EXIT_CONFIG, "--k is required (no default exists)")
        k = 1
    try:
        return Hyperparams(
            k=k,
            t_max=args.t_max,
            tol=args.tol,
            seed=args.seed,
            variant=variant,
            ridge_eps=args.ridge_eps,
            **values,
        )
    except InvalidHyperparamsError as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc


def _load_normalized(manifest, mode: str) -> tuple[ZslDataset, ZslDataset]:
    """Load a manifest; return (raw, feature-normalized) datasets."""
    try:
        raw = load_manifest(manifest)
    except DatasetError as exc:
        raise CommandError(EXIT_DATA, str(exc)) from exc
    if mode == "none":
        return raw, raw
    prepared = dataclasses.replace(
        raw,
        visual_seen=normalize(raw.visual_seen, mode),
        visual_unseen=normalize(raw.visual_unseen, mode),
    )
    return raw, prepared


def _write_json(path: Path, payload: dict) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CommandError(EXIT_DATA, f"cannot write {path}: {exc}") from exc


def _hyper_dict(hyper: Hyperparams) -> dict:
    return dataclasses.asdict(hyper)


def cmd_train(args) -> int:
    hyper = _build_hyper(args, args.variant)
    raw, dataset = _load_normalized(args.manifest, args.normalize)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        model, trace = fit(dataset, hyper)
    except JcmsplError as exc:
        raise CommandError(EXIT_TRAIN, str(exc)) from exc
    fingerprint = fingerprint_dataset(raw)
    save_model(out / "model.bin", model, fingerprint)
    write_trace_csv(trace, out / "trace.csv")
    eff = hyper.effective()
    summary = {
        "variant": hyper.variant,
        "hyperparams": _hyper_dict(hyper),
        "effective_lambdas": {
            "lambda1": eff.lambda1,
            "lambda2": eff.lambda2,
            "lambda3": eff.lambda3,
            "lambda4": eff.lambda4,
        },
        "normalize": args.normalize,
        "initial_loss": trace.losses[0],
        "final_loss": trace.losses[-1],
        "iterations": trace.iterations,
        "converged": trace.converged_at is not None,
        "converged_at": trace.converged_at,
        "ridge_warnings": len(trace.warnings),
        "dataset": fingerprint.to_dict(),
        "outputs": {"model": "model.bin", "trace": "trace.csv"},
    }
    _write_json(out / "summary.json", summary)
    print(
        f"trained variant={hyper.variant} final_loss={trace.losses[-1]:.6g} "
        f"iterations={trace.iterations} converged={trace.converged_at is not None}"
    )
    print(f"wrote {out / 'model.bin'}")
    return EXIT_OK


def _load_model_checked(model_path, dataset: ZslDataset):
    try:
        archive = load_model(model_path)
    except (ArchiveError, DatasetError) as exc:
        raise CommandError(EXIT_DATA, str(exc)) from exc
    fp = archive.fingerprint
    if fp.m != dataset.m or fp.d != dataset.d:
        raise CommandError(
            EXIT_EVAL,
            f"model was trained for dimensions m={fp.m}, d={fp.d}; "
            f"dataset has m={dataset.m}, d={dataset.d}",
        )
    if fp.sha256 != fingerprint_dataset(dataset).sha256:
        print(
            "note: dataset checksum differs from the training-time fingerprint",
            file=sys.stderr,
        )
    return archive.model


def cmd_eval(args) -> int:
    raw, dataset = _load_normalized(args.manifest, args.normalize)
    model = _load_model_checked(args.model, raw)
    if args.gzsl and args.direction == "s2v":
        raise CommandError(EXIT_CONFIG, "generalized scoring is defined for v2s only")
    if args.gzsl and args.hit_k is not None:
        raise CommandError(EXIT_CONFIG, "--hit-k cannot be combined with --gzsl")
    try:
        if args.gzsl:
            report = eval_generalized(
                model,
                dataset,
                holdout_fraction=args.holdout,
                seed=args.seed,
                distance=args.distance,
            )
        else:
            report = eval_standard(
                model, dataset, direction=args.direction, distance=args.distance
            )
            if args.hit_k is not None:
                frac = eval_hit_at_k(
                    model,
                    dataset,
                    args.hit_k,
                    direction=args.direction,
                    distance=args.distance,
                )
                report = dataclasses.replace(report, hit_at_k=(args.hit_k, frac))
    except (InvalidKError, InvalidFractionError, OutOfRangeError, ValueError) as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc
    except (
        UnsupportedVariantError,
        DimensionMismatchError,
        EmptyCandidatesError,
        AllZeroNormError,
    ) as exc:
        raise CommandError(EXIT_EVAL, str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "model": str(args.model),
        "manifest": str(args.manifest),
        "normalize": args.normalize,
        "protocol": "generalized" if args.gzsl else "standard",
        "holdout_fraction": args.holdout if args.gzsl else None,
        "split_seed": args.seed if args.gzsl else None,
        "report": report.to_dict(),
    }
    _write_json(out / "report.json", payload)
    line = (
        f"overall_accuracy={report.overall_accuracy:.6f} "
        f"per_class_mean={report.per_class_mean_accuracy:.6f}"
    )
    if report.hm is not None:
        line += f" acc_s={report.acc_s:.6f} acc_u={report.acc_u:.6f} hm={report.hm:.6f}"
    if report.hit_at_k is not None:
        line += f" hit@{report.hit_at_k[0]}={report.hit_at_k[1]:.6f}"
    print(line)
    return EXIT_OK


def cmd_ablate(args) -> int:
    raw, dataset = _load_normalized(args.manifest, args.normalize)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fingerprint = fingerprint_dataset(raw)
    rows = []
    first_failure = EXIT_OK
    for variant in ABLATION_ORDER:
        row = {
            "variant": variant,
            "loss": None,
            "iters": None,
            "acc_v2s": None,
            "acc_s2v": None,
            "error": None,
        }
        try:
            hyper = _build_hyper(args, variant)
            try:
                model, trace = fit(dataset, hyper)
            except JcmsplError as exc:
                raise CommandError(EXIT_TRAIN, str(exc)) from exc
            row["loss"] = trace.losses[-1]
            row["iters"] = trace.iterations
            try:
                row["acc_v2s"] = eval_standard(
                    model, dataset, direction="v2s", distance=args.distance
                ).overall_accuracy
                if variant != "fpl":
                    row["acc_s2v"] = eval_standard(
                        model, dataset, direction="s2v", distance=args.distance
                    ).overall_accuracy
            except JcmsplError as exc:
                raise CommandError(EXIT_EVAL, str(exc)) from exc
            save_model(out / f"model_{variant}.bin", model, fingerprint)
        except CommandError as exc:
            row["error"] = str(exc)
            if first_failure == EXIT_OK:
                first_failure = exc.code
            print(f"jcmspl ablate: {variant}: {exc}", file=sys.stderr)
        rows.append(row)

    csv_path = out / "ablation.csv"
    try:
        with open(csv_path, "w") as fh:
            fh.write("variant,loss,iters,acc_v2s,acc_s2v\n")
            for row in rows:
                cells = [row["variant"]]
                for key, fmt in (
                    ("loss", "%.17g"),
                    ("iters", "%d"),
                    ("acc_v2s", "%.17g"),
                    ("acc_s2v", "%.17g"),
                ):
                    cells.append("" if row[key] is None else fmt % row[key])
                fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise CommandError(EXIT_DATA, f"cannot write {csv_path}: {exc}") from exc
    _write_json(out / "ablation.json", {"dataset": fingerprint.to_dict(), "rows": rows})
    for row in rows:
        acc = "-" if row["acc_v2s"] is None else f"{row['acc_v2s']:.6f}"
        print(f"{row['variant']:>8s}  acc_v2s={acc}")
    return first_failure


def cmd_synth(args) -> int:
    try:
        spec = SynthSpec(
            m=args.m,
            d=args.d,
            k=args.k,
            num_seen_classes=args.cs,
            num_unseen_classes=args.cu,
            samples_per_class=args.spc,
            noise_sigma=args.noise,
            seed=args.seed,
        )
    except InvalidSpecError as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc
    dataset, planted = synth_generate(spec)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_manifest(dataset, out / "manifest.json")
    except OSError as exc:
        raise CommandError(EXIT_DATA, f"cannot write to {out}: {exc}") from exc
    planted_model = JcmsplModel(
        A=planted.A_true,
        B=planted.B_true,
        C=planted.concept_means,
        variant="full",
        hyper=Hyperparams(k=spec.k, seed=spec.seed),
    )
    save_model(out / "planted_model.bin", planted_model, fingerprint_dataset(dataset))
    print(f"wrote {out / 'manifest.json'} ({dataset.n_seen} seen / "
          f"{dataset.n_unseen} unseen samples)")
    print(f"wrote {out / 'planted_model.bin'}")
    return EXIT_OK


def _add_hyper_flags(sub):
    sub.add_argument("--k", type=int, default=None,
                     help="concept-space dimension (required; no default)")
    sub.add_argument("--preset", choices=sorted(PRESETS), default=None,
                     help="published lambda preset; explicit flags override it")
    for i in (1, 2, 3, 4):
        sub.add_argument(f"--lambda{i}", type=float, default=None, dest=f"lambda{i}")
    sub.add_argument("--t-max", type=int, default=100, help="iteration cap")
    sub.add_argument("--tol", type=float, default=1e-5,
                     help="relative loss-change stopping threshold")
    sub.add_argument("--seed", type=int, default=0, help="initialization seed")
    sub.add_argument("--ridge-eps", type=float, default=1e-8,
                     help="fallback damping for singular Gram matrices")
    sub.add_argument("--normalize", choices=NORMALIZE_MODES, default="l2_columns",
                     help="visual feature normalization (default l2_columns)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jcmspl",
        description="Joint concept matching-space projection learning for "
                    "inductive zero-shot recognition.",
    )
    parser.add_argument("--version", action="version", version=f"jcmspl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a model from a dataset manifest")
    train.add_argument("--manifest", required=True)
    train.add_argument("--out", required=True, help="output directory")
    train.add_argument("--variant", choices=VARIANTS, default="full")
    _add_hyper_flags(train)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a saved model on a manifest")
    ev.add_argument("--model", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--out", default=".", help="directory for report.json")
    ev.add_argument("--direction", choices=DIRECTIONS, default="v2s")
    ev.add_argument("--distance", choices=DISTANCES, default="cosine")
    ev.add_argument("--hit-k", type=int, default=None,
                    help="also report the top-K hit rate")
    ev.add_argument("--gzsl", action="store_true",
                    help="generalized protocol over seen and unseen classes")
    ev.add_argument("--holdout", type=float, default=0.2,
                    help="seen-class holdout fraction for --gzsl")
    ev.add_argument("--seed", type=int, default=0, help="holdout split seed")
    ev.add_argument("--normalize", choices=NORMALIZE_MODES, default="l2_columns")
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="train and score every variant")
    ab.add_argument("--manifest", required=True)
    ab.add_argument("--out", required=True, help="output directory")
    ab.add_argument("--distance", choices=DISTANCES, default="cosine")
    _add_hyper_flags(ab)
    ab.set_defaults(func=cmd_ablate)

    sy = sub.add_parser("synth", help="generate the planted-model benchmark")
    sy.add_argument("--out", required=True, help="output directory")
    sy.add_argument("--m", type=int, default=50, help="visual dimension")
    sy.add_argument("--d", type=int, default=20, help="semantic dimension")
    sy.add_argument("--k", type=int, default=40, help="concept dimension")
    sy.add_argument("--cs", type=int, default=10, help="seen class count")
    sy.add_argument("--cu", type=int, default=5, help="unseen class count")
    sy.add_argument("--spc", type=int, default=50, help="samples per class")
    sy.add_argument("--noise", type=float, default=0.05, help="noise level")
    sy.add_argument("--seed", type=int, default=1)
    sy.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as err:
        print(f"jcmspl {args.command}: error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
