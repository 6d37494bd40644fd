"""Command-line surface: preprocess, train, translate, align, evaluate,
synth, experiment, rerun.

Every command resolves its flags into a RunManifest written alongside its
outputs; ``alignmt rerun <manifest>`` re-executes the recorded invocation,
which reproduces the primary outputs byte for byte.  Exit codes are a
stable contract: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .data import Vocab, build_vocab, encode_pairs, read_lines, write_lines
from .decoding import beam_search, extract_hard_alignment, force_decode, format_pharaoh
from .errors import (
    AlignmtError,
    CheckpointError,
    ConfigurationError,
    ConsistencyError,
    DataError,
    DeterminismError,
    DomainError,
    NumericError,
    ParseError,
    ShapeError,
)
from .harness import ExperimentConfig, SynthSpec, generate, run_experiment, write_data
from .losses import LossConfig
from .metrics import aer, bleu4, bootstrap_aer, bootstrap_bleu, parse_gold_alignments, parse_system_line
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .supervision import load_alignments
from .training import TrainConfig, load_opt_state, save_opt_state, train, write_curve

ALPHAS_MAGIC = "alignmt-alphas"

USAGE_EXIT = 1
DATA_EXIT = 2
NUMERIC_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command, argv, args, inputs, outputs) -> None:
    """Human-readable key-value record of one resolved invocation."""
    lines = [
        f"artifact = alignmt {__version__}",
        f"command = {command}",
        f"argv = {json.dumps(list(argv))}",
    ]
    for key in sorted(vars(args)):
        if key in ("func", "command"):
            continue
        lines.append(f"arg.{key} = {getattr(args, key)!r}")
    for label, p in inputs:
        lines.append(f"input.{label}.path = {p}")
        lines.append(f"input.{label}.sha256 = {_sha256(p)}")
    for label, p in outputs:
        lines.append(f"output.{label}.path = {p}")
        lines.append(f"output.{label}.sha256 = {_sha256(p)}")
    write_lines(path, lines)


def read_manifest_argv(path) -> list[str]:
    for line in read_lines(path):
        if line.startswith("argv = "):
            return json.loads(line[len("argv = "):])
    raise ParseError(f"no argv entry in manifest {path}")


# ---------------------------------------------------------------------------
# Supervision matrix files
# ---------------------------------------------------------------------------

def save_alphas(path, matrices) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{ALPHAS_MAGIC} 1 {len(matrices)}\n")
        for mat in matrices:
            f.write(f"alpha {mat.shape[0]} {mat.shape[1]}\n")
            for row in mat:
                f.write(" ".join(repr(v) for v in row) + "\n")


def load_alphas(path) -> list[np.ndarray]:
    lines = read_lines(path)
    head = lines[0].split()
    if len(head) != 3 or head[0] != ALPHAS_MAGIC or head[1] != "1":
        raise ParseError(f"not a supervision file: {path}")
    count = int(head[2])
    mats = []
    i = 1
    for _ in range(count):
        tag, rows, cols = lines[i].split()
        if tag != "alpha":
            raise ParseError(f"bad supervision block header: {lines[i]!r}")
        rows, cols = int(rows), int(cols)
        block = np.array(
            [[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]
        ).reshape(rows, cols)
        mats.append(block)
        i += 1 + rows
    return mats


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_preprocess(args, argv) -> int:
    src_lines = read_lines(args.train_src)
    tgt_lines = read_lines(args.train_tgt)
    if len(src_lines) != len(tgt_lines):
        raise ConsistencyError(
            f"line counts differ: {args.train_src} has {len(src_lines)}, "
            f"{args.train_tgt} has {len(tgt_lines)}"
        )
    align_lines = None
    if args.align:
        align_lines = read_lines(args.align)
        if len(align_lines) != len(src_lines):
            raise ConsistencyError(
                f"line counts differ: corpus has {len(src_lines)}, "
                f"{args.align} has {len(align_lines)}"
            )

    kept = [
        i
        for i in range(len(src_lines))
        if len(src_lines[i].split()) <= args.max_len
        and len(tgt_lines[i].split()) <= args.max_len
    ]
    kept_src = [src_lines[i] for i in kept]
    kept_tgt = [tgt_lines[i] for i in kept]
    src_vocab = build_vocab(kept_src, args.src_cap)
    tgt_vocab = build_vocab(kept_tgt, args.tgt_cap)

    os.makedirs(args.out, exist_ok=True)
    src_vocab.save(os.path.join(args.out, "src.vocab"))
    tgt_vocab.save(os.path.join(args.out, "tgt.vocab"))
    write_lines(os.path.join(args.out, "pairs.idx"), [str(i) for i in kept])
    write_lines(os.path.join(args.out, "train.src.txt"), kept_src)
    write_lines(os.path.join(args.out, "train.tgt.txt"), kept_tgt)

    outputs = [
        ("src_vocab", os.path.join(args.out, "src.vocab")),
        ("tgt_vocab", os.path.join(args.out, "tgt.vocab")),
        ("pairs_idx", os.path.join(args.out, "pairs.idx")),
        ("train_src", os.path.join(args.out, "train.src.txt")),
        ("train_tgt", os.path.join(args.out, "train.tgt.txt")),
    ]
    inputs = [("train_src", args.train_src), ("train_tgt", args.train_tgt)]
    if align_lines is not None:
        pairs = encode_pairs(kept_src, kept_tgt, src_vocab, tgt_vocab)
        kept_align = [align_lines[i] for i in kept]
        matrices = load_alignments(kept_align, pairs, swap=args.swap_align)
        save_alphas(os.path.join(args.out, "sup.alphas"), matrices)
        outputs.append(("supervision", os.path.join(args.out, "sup.alphas")))
        inputs.append(("align", args.align))

    write_manifest(
        os.path.join(args.out, "manifest.txt"), "preprocess", argv, args, inputs, outputs
    )
    print(f"kept {len(kept)}/{len(src_lines)} pairs; vocab sizes "
          f"{src_vocab.size}/{tgt_vocab.size}")
    return 0


def cmd_train(args, argv) -> int:
    data_dir = args.data
    src_vocab = Vocab.load(os.path.join(data_dir, "src.vocab"))
    tgt_vocab = Vocab.load(os.path.join(data_dir, "tgt.vocab"))
    train_src = read_lines(os.path.join(data_dir, "train.src.txt"))
    train_tgt = read_lines(os.path.join(data_dir, "train.tgt.txt"))
    pairs = encode_pairs(train_src, train_tgt, src_vocab, tgt_vocab)

    loss = LossConfig(kind=args.delta, weight=args.lam)
    supervision = None
    if loss.supervised:
        sup_path = os.path.join(data_dir, "sup.alphas")
        if not os.path.exists(sup_path):
            raise ConfigurationError(
                f"delta {args.delta!r} needs {sup_path}; rerun preprocess with --align"
            )
        supervision = load_alphas(sup_path)

    dev_pairs = None
    if args.dev_src and args.dev_tgt:
        dev_pairs = encode_pairs(
            read_lines(args.dev_src), read_lines(args.dev_tgt), src_vocab, tgt_vocab
        )

    model_config = ModelConfig(
        src_vocab=src_vocab.size,
        tgt_vocab=tgt_vocab.size,
        embed_dim=args.emb_dim,
        hidden_dim=args.hidden_dim,
        attn_dim=args.attn_dim,
    )
    train_config = TrainConfig(
        loss=loss,
        batch_size=args.batch_size,
        max_updates=args.max_updates,
        eval_every=args.eval_every,
        seed=args.seed,
        clip_norm=None if args.no_clip else args.clip_norm,
    )

    params = opt_state = None
    if args.resume:
        _, params, _, _ = load_checkpoint(os.path.join(args.resume, "checkpoint.last"))
        opt_state = load_opt_state(os.path.join(args.resume, "optstate.last"))

    result = train(
        pairs,
        supervision,
        model_config,
        train_config,
        dev_pairs=dev_pairs,
        tgt_vocab=tgt_vocab,
        params=params,
        opt_state=opt_state,
        log=print if args.verbose else None,
    )

    os.makedirs(args.out, exist_ok=True)
    best_path = os.path.join(args.out, "checkpoint.best")
    last_path = os.path.join(args.out, "checkpoint.last")
    save_checkpoint(best_path, model_config, result.best_params, src_vocab, tgt_vocab)
    save_checkpoint(last_path, model_config, result.params, src_vocab, tgt_vocab)
    save_opt_state(os.path.join(args.out, "optstate.last"), result.opt_state)
    write_curve(os.path.join(args.out, "curve.csv"), result.curve)

    inputs = [
        ("train_src", os.path.join(data_dir, "train.src.txt")),
        ("train_tgt", os.path.join(data_dir, "train.tgt.txt")),
    ]
    if args.dev_src:
        inputs.append(("dev_src", args.dev_src))
        inputs.append(("dev_tgt", args.dev_tgt))
    outputs = [
        ("checkpoint_best", best_path),
        ("checkpoint_last", last_path),
        ("optstate", os.path.join(args.out, "optstate.last")),
        ("curve", os.path.join(args.out, "curve.csv")),
    ]
    write_manifest(
        os.path.join(args.out, "manifest.txt"), "train", argv, args, inputs, outputs
    )
    print(f"trained {result.params and 'ok'}: best dev BLEU {result.best_bleu:.4f} "
          f"at update {result.best_update}")
    return 0


def cmd_translate(args, argv) -> int:
    config, params, src_vocab, tgt_vocab = load_checkpoint(args.checkpoint)
    lines = read_lines(args.input)
    outputs = []
    for line in lines:
        hyp = beam_search(src_vocab.encode(line), config, params, beam=args.beam)
        outputs.append(tgt_vocab.decode(hyp.tokens))
    write_lines(args.output, outputs)
    write_manifest(
        args.output + ".manifest.txt",
        "translate",
        argv,
        args,
        [("checkpoint", args.checkpoint), ("input", args.input)],
        [("translation", args.output)],
    )
    return 0


def cmd_align(args, argv) -> int:
    config, params, src_vocab, tgt_vocab = load_checkpoint(args.checkpoint)
    src_lines = read_lines(args.src)
    tgt_lines = read_lines(args.tgt)
    pairs = encode_pairs(src_lines, tgt_lines, src_vocab, tgt_vocab)
    lines = [
        format_pharaoh(extract_hard_alignment(force_decode(pair, config, params)))
        for pair in pairs
    ]
    write_lines(args.output, lines)
    write_manifest(
        args.output + ".manifest.txt",
        "align",
        argv,
        args,
        [("checkpoint", args.checkpoint), ("src", args.src), ("tgt", args.tgt)],
        [("alignment", args.output)],
    )
    return 0


def cmd_evaluate(args, argv) -> int:
    if args.mode == "bleu":
        candidates = read_lines(args.candidates)
        reference_sets = [read_lines(p) for p in args.references]
        for p, refs in zip(args.references, reference_sets):
            if len(refs) != len(candidates):
                raise ConsistencyError(
                    f"line counts differ: {args.candidates} has {len(candidates)}, "
                    f"{p} has {len(refs)}"
                )
        references = [
            [refs[i] for refs in reference_sets] for i in range(len(candidates))
        ]
        score = bleu4(candidates, references)
        lines = [f"bleu4 = {score!r}"]
        if args.bootstrap:
            lo, hi = bootstrap_bleu(
                candidates, references, n_resamples=args.bootstrap, seed=args.bootstrap_seed
            )
            lines.append(f"bleu4_interval95 = {lo!r} {hi!r}")
        inputs = [("candidates", args.candidates)] + [
            (f"references_{i}", p) for i, p in enumerate(args.references)
        ]
    else:
        system = [parse_system_line(line) for line in read_lines(args.system)]
        sure, possible = parse_gold_alignments(read_lines(args.gold))
        score = aer(system, sure, possible)
        lines = [f"aer = {score!r}"]
        if args.bootstrap:
            lo, hi = bootstrap_aer(
                system, sure, possible, n_resamples=args.bootstrap, seed=args.bootstrap_seed
            )
            lines.append(f"aer_interval95 = {lo!r} {hi!r}")
        inputs = [("system", args.system), ("gold", args.gold)]

    write_lines(args.output, lines)
    write_manifest(
        args.output + ".manifest.txt", "evaluate", argv, args, inputs,
        [("scores", args.output)],
    )
    for line in lines:
        print(line)
    return 0


def cmd_synth(args, argv) -> int:
    spec = SynthSpec(
        task=args.task,
        vocab_size=args.vocab,
        min_len=args.min_len,
        max_len=args.max_len,
        n_train=args.train,
        n_dev=args.dev,
        n_test=args.test,
        seed=args.seed,
    )
    data = generate(spec)
    write_data(data, args.out)
    outputs = [
        (f"{split}_{side}", os.path.join(args.out, f"{split}.{side}"))
        for split in ("train", "dev", "test")
        for side in ("src", "tgt", "align")
    ]
    write_manifest(
        os.path.join(args.out, "manifest.txt"), "synth", argv, args, [], outputs
    )
    return 0


def cmd_experiment(args, argv) -> int:
    spec = SynthSpec(
        task=args.task,
        vocab_size=args.vocab,
        min_len=args.min_len,
        max_len=args.max_len,
        n_train=args.train,
        n_dev=args.dev,
        n_test=args.test,
        seed=args.data_seed,
    )
    shared = dict(
        embed_dim=args.emb_dim,
        hidden_dim=args.hidden_dim,
        batch_size=args.batch_size,
        max_updates=args.max_updates,
        eval_every=args.eval_every,
        beam=args.beam,
        seed=args.seed,
    )
    configs = [
        ExperimentConfig(name="nmt", loss=LossConfig(kind="none", weight=0.0), **shared),
        ExperimentConfig(
            name=f"sa-{args.delta}",
            loss=LossConfig(kind=args.delta, weight=args.lam),
            **shared,
        ),
    ]
    report = run_experiment(spec, configs, log=print if args.verbose else None)
    report.write(args.out)
    outputs = [("report", os.path.join(args.out, "report.csv"))]
    for name, mats in report.heatmaps.items():
        for idx in range(len(mats)):
            outputs.append(
                (f"heatmap_{name}_{idx}", os.path.join(args.out, f"heatmap_{name}_{idx}.txt"))
            )
    write_manifest(
        os.path.join(args.out, "manifest.txt"), "experiment", argv, args, [], outputs
    )
    for line in report.to_csv_lines():
        print(line)
    return 0


def cmd_rerun(args, argv) -> int:
    recorded = read_manifest_argv(args.manifest)
    return main(recorded)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alignmt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"alignmt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="build vocabularies and attention supervision")
    p.add_argument("--train-src", required=True)
    p.add_argument("--train-tgt", required=True)
    p.add_argument("--align", default=None, help="Pharaoh alignment file for the training pairs")
    p.add_argument("--swap-align", action="store_true",
                   help="alignment tokens are target-source instead of source-target")
    p.add_argument("--src-cap", type=int, default=30000)
    p.add_argument("--tgt-cap", type=int, default=30000)
    p.add_argument("--max-len", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model on preprocessed data")
    p.add_argument("--data", required=True, help="preprocess output directory")
    p.add_argument("--dev-src", default=None)
    p.add_argument("--dev-tgt", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--delta", choices=["none", "mse", "mul", "ce"], default="ce")
    p.add_argument("--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--emb-dim", type=int, default=620)
    p.add_argument("--hidden-dim", type=int, default=1000)
    p.add_argument("--attn-dim", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=80)
    p.add_argument("--max-updates", type=int, default=300000)
    p.add_argument("--eval-every", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip-norm", type=float, default=1.0)
    p.add_argument("--no-clip", action="store_true", help="disable gradient clipping")
    p.add_argument("--resume", default=None, help="training directory to resume from")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="translate a source file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--beam", type=int, default=12)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("align", help="force-decode pairs and emit hard alignments")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("evaluate", help="score translations (BLEU) or alignments (AER)")
    p.add_argument("--mode", choices=["bleu", "aer"], required=True)
    p.add_argument("--candidates")
    p.add_argument("--references", nargs="+", default=[])
    p.add_argument("--system")
    p.add_argument("--gold")
    p.add_argument("--output", required=True)
    p.add_argument("--bootstrap", type=int, default=0,
                   help="resample count for a 95%% interval (0 disables)")
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic corpus with gold alignments")
    p.add_argument("--task", choices=["copy", "reverse", "local-swap"], default="reverse")
    p.add_argument("--vocab", type=int, default=20)
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--train", type=int, default=3000)
    p.add_argument("--dev", type=int, default=200)
    p.add_argument("--test", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="train supervised vs unsupervised on synthetic data")
    p.add_argument("--task", choices=["copy", "reverse", "local-swap"], default="reverse")
    p.add_argument("--vocab", type=int, default=20)
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--train", type=int, default=3000)
    p.add_argument("--dev", type=int, default=200)
    p.add_argument("--test", type=int, default=200)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--delta", choices=["mse", "mul", "ce"], default="ce")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--emb-dim", type=int, default=32)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--max-updates", type=int, default=2000)
    p.add_argument("--eval-every", type=int, default=200)
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("rerun", help="re-execute a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "evaluate":
            if args.mode == "bleu" and (not args.candidates or not args.references):
                raise ConfigurationError("evaluate --mode bleu needs --candidates and --references")
            if args.mode == "aer" and (not args.system or not args.gold):
                raise ConfigurationError("evaluate --mode aer needs --system and --gold")
        return args.func(args, argv)
    except (ConfigurationError, DomainError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except (ParseError, ConsistencyError, DataError, CheckpointError, ShapeError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return DATA_EXIT
    except (NumericError, DeterminismError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return NUMERIC_EXIT


if __name__ == "__main__":
    sys.exit(main())
