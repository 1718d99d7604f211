"""Command-line interface.

Subcommands: gen-data, train, eval, gradcheck, toy-demo.
Exit codes: 0 success, 1 check/validation failure, 2 usage error.
"""

import argparse
import sys
from dataclasses import fields as dc_fields

from . import config as cfgmod
from . import data as D
from . import evaluation as E
from . import gradcheck as G
from . import toy
from .training import Trainer, TrainConfig, TrainingAborted, load_model_from_checkpoint

_TRAIN_TYPES = {
    "task": str, "model_kind": str, "dataset": str, "batch_size": int,
    "total_updates": int, "alpha0": float, "eta0": float,
    "decay_factor": float, "decay_every": int, "eps_mul": float, "seed": int,
    "checkpoint_every": int, "precision": str, "projected": bool,
    "relation_units": int, "pooled_units": int, "hidden": tuple,
}


def _effective_config(tc):
    vals = {}
    for f in dc_fields(TrainConfig):
        v = getattr(tc, f.name)
        if isinstance(v, tuple):
            v = " ".join(str(x) for x in v)
        vals[f.name] = str(v)
    return cfgmod.serialize_config(vals)


def _build_train_config(args):
    values = {}
    if args.config:
        raw = cfgmod.load_config(args.config)
        for key, sval in raw.items():
            if key not in _TRAIN_TYPES:
                raise cfgmod.ConfigError(f"unknown config key {key!r}")
            values[key] = cfgmod.coerce(sval, _TRAIN_TYPES[key])
    overrides = {
        "task": args.task, "model_kind": args.model, "dataset": args.data,
        "batch_size": args.batch_size, "total_updates": args.updates,
        "alpha0": args.alpha, "eta0": args.eta, "decay_factor": args.decay_factor,
        "decay_every": args.decay_every, "eps_mul": args.eps_mul,
        "seed": args.seed, "checkpoint_every": args.checkpoint_every,
        "precision": args.precision, "projected": args.projected or None,
        "relation_units": args.relation_units, "pooled_units": args.pooled_units,
    }
    for k, v in overrides.items():
        if v is not None:
            values[k] = v
    missing = [k for k in ("task", "model_kind", "dataset") if k not in values]
    if missing:
        raise cfgmod.ConfigError(f"missing required options: {', '.join(missing)}")
    return TrainConfig(**values)


def cmd_gen_data(args):
    task = D.get_task(args.task)
    train_path, test_path = D.generate_dataset(
        args.cifar, task, args.out, seed=args.seed, repeats=args.repeats,
        train_files=args.train_files.split(",") if args.train_files else None,
        test_files=args.test_files.split(",") if args.test_files else None,
    )
    print(f"wrote {train_path}")
    print(f"wrote {test_path}")
    return 0


def cmd_train(args):
    tc = _build_train_config(args)
    if args.print_config:
        sys.stdout.write(_effective_config(tc))
        return 0
    if args.resume:
        trainer = Trainer.resume(args.resume)
    else:
        trainer = Trainer(tc)

    def progress(step, loss):
        print(f"update {step}/{tc.total_updates}  loss {loss:.6g}", flush=True)

    try:
        final = trainer.run(
            checkpoint_path=args.out, log_path=args.log,
            progress=progress if args.verbose else None,
        )
    except TrainingAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    print(f"done at update {trainer.step}, final loss {final:.6g}")
    if args.out:
        print(f"checkpoint: {args.out}")
    return 0


def cmd_eval(args):
    model, header = load_model_from_checkpoint(args.checkpoint)
    task = D.get_task(args.task or header["train_config"]["task"])
    if bool(args.image_a) != bool(args.image_b) or (args.image_a and not args.homography):
        raise cfgmod.ConfigError(
            "real-world eval needs --image-a, --image-b and --homography together"
        )
    if not args.image_a and not args.data:
        raise cfgmod.ConfigError("either --data or the real-world options are required")
    if args.image_a:
        pairs = D.ingest_patch_pairs(
            args.image_a, args.image_b, args.homography, args.count, args.seed
        )
        report = E.evaluate_model(model, pairs, task)
    else:
        report = E.evaluate_model(model, args.data, task)
    print(E.format_report_table([report]))
    if args.out:
        E.write_reports_csv(args.out, [report])
        print(f"wrote {args.out}")
    return 0


def cmd_gradcheck(args):
    results = G.check_all(
        trials=args.trials, step=args.step, tol=args.tol, seed=args.seed,
        corrupt=args.corrupt,
    )
    if args.whole_model:
        results.append(G.check_whole_model(seed=args.seed, tol=args.tol))
    ok = True
    for r in results:
        print(r.line())
        ok = ok and r.passed
    return 0 if ok else 1


def cmd_toy_demo(args):
    text, res = toy.demo_report(trials=args.trials, seed=args.seed)
    print(text)
    return 0 if res.recovered == res.considered else 1


def make_parser():
    p = argparse.ArgumentParser(
        prog="caunet",
        description="Relation learning with contrast association units",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate RLDS datasets from CIFAR-10 binaries")
    g.add_argument("--task", required=True, choices=sorted(D.TASKS))
    g.add_argument("--cifar", required=True, help="directory with CIFAR-10 .bin batches")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--repeats", type=int, default=10)
    g.add_argument("--train-files", help="comma-separated batch files (default data_batch_1..5.bin)")
    g.add_argument("--test-files", help="comma-separated batch files (default test_batch.bin)")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model on an RLDS dataset")
    t.add_argument("--task", choices=sorted(D.TASKS))
    t.add_argument("--model", choices=["ctn", "bln", "can"])
    t.add_argument("--data", help="training RLDS file")
    t.add_argument("--out", help="checkpoint path")
    t.add_argument("--log", help="loss CSV path")
    t.add_argument("--updates", type=int, help="total mini-batch updates (default 200000)")
    t.add_argument("--batch-size", type=int)
    t.add_argument("--alpha", type=float, help="Adam learning rate (default 0.005)")
    t.add_argument("--eta", type=float, help="multiplicative-update rate (default 0.005)")
    t.add_argument("--decay-factor", type=float, help="default 0.95")
    t.add_argument("--decay-every", type=int, help="default 500 updates")
    t.add_argument("--eps-mul", type=float, help="default 1e-20")
    t.add_argument("--seed", type=int)
    t.add_argument("--checkpoint-every", type=int)
    t.add_argument("--precision", choices=["single", "double"])
    t.add_argument("--projected", action="store_true",
                   help="ablation: projected Adam for non-negative weights")
    t.add_argument("--relation-units", type=int)
    t.add_argument("--pooled-units", type=int)
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--print-config", action="store_true",
                   help="print the effective config and exit")
    t.add_argument("--resume", help="resume from a checkpoint file")
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="RLDS test file")
    e.add_argument("--task", choices=sorted(D.TASKS))
    e.add_argument("--out", help="report CSV path")
    e.add_argument("--image-a", help="real-world: first frame (PGM)")
    e.add_argument("--image-b", help="real-world: second frame (PGM)")
    e.add_argument("--homography", help="real-world: 3x3 homography file")
    e.add_argument("--count", type=int, default=25000, help="real-world pairs to sample")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("gradcheck", help="finite-difference check of all layers")
    c.add_argument("--trials", type=int, default=G.DEFAULT_TRIALS)
    c.add_argument("--step", type=float, default=G.DEFAULT_STEP)
    c.add_argument("--tol", type=float, default=G.DEFAULT_TOL)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--whole-model", action="store_true")
    c.add_argument("--corrupt", help="sabotage the named layer (must then fail)")
    c.set_defaults(func=cmd_gradcheck)

    d = sub.add_parser("toy-demo", help="translation-detection demo with hand-built units")
    d.add_argument("--trials", type=int, default=1000)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_toy_demo)
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (D.DataError, E.EvalError, cfgmod.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
