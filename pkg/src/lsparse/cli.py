"""Command-line entry point: ``lsparse {train,eval,bench,init}``.

Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
Every failure prints exactly one ``error: ...`` line on stderr.
"""
import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from .config import ConfigError, TrainConfig
from .data import DataFormatError, extract_patches, load_dense, load_uci_bow, read_pgm
from .snapshot import SnapshotError, load_snapshot, save_snapshot

__all__ = ["main"]


class UsageError(Exception):
    """Bad flags or inputs; exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(p):
    for f in fields(TrainConfig):
        p.add_argument(f"--{f.name}", default=argparse.SUPPRESS, metavar=f.name.upper())


def build_parser():
    parser = _Parser(prog="lsparse", description="Sparse-responsibility variational inference")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", help="fit a model and write metrics, snapshot and resolved config")
    p.add_argument("--config", default=None, help="key = value config file; flags override it")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="score a snapshot on heldout data")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--heldout", required=True)
    p.add_argument("--data_format", default="auto")
    p.add_argument("--seed", type=int, default=None, help="completion-split seed (default: training seed)")

    p = sub.add_parser("bench", help="substep timings over a (K, L) grid")
    p.add_argument("--model", default="gmm", choices=["gmm", "lda"])
    p.add_argument("--K", default="50,200")
    p.add_argument("--L", default="1,2,4,8,16,dense")
    p.add_argument("--N", type=int, default=20000, help="observations (gmm) or documents (lda)")
    p.add_argument("--D", type=int, default=64, help="dimension (gmm) or vocabulary size (lda)")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("init", help="k-means++ seeding; writes an initial snapshot")
    p.add_argument("--config", default=None)
    _add_config_flags(p)
    return parser


# ---------------------------------------------------------------------------
# helpers

def _resolve_config(args):
    base = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    overrides = {f.name: getattr(args, f.name) for f in fields(TrainConfig) if hasattr(args, f.name)}
    return TrainConfig.from_pairs(overrides, base)


def _fmt_of(path, fmt, model):
    if fmt != "auto":
        return fmt
    if model == "lda":
        return "uci"
    if path.endswith(".pgm"):
        return "pgm"
    if path.endswith((".raw64", ".bin")):
        return "raw64"
    return "csv"


def load_units(path, fmt, model, flag="--data"):
    if not path or not os.path.exists(path):
        raise UsageError(f"{flag}: file not found: {path}")
    fmt = _fmt_of(path, fmt, model)
    if model == "lda" and fmt != "uci":
        raise UsageError(f"{flag}: lda models read UCI bag-of-words files, not {fmt}")
    if model == "gmm" and fmt == "uci":
        raise UsageError(f"{flag}: gmm models read csv, raw64 or pgm files")
    try:
        if fmt == "uci":
            return load_uci_bow(path)
        if fmt == "pgm":
            return extract_patches(read_pgm(path))
        return load_dense(path, fmt)
    except DataFormatError as exc:
        raise DataFormatError(f"{flag}: {exc}") from None


def initial_state(cfg, units):
    from .expfam import GaussianWishart
    from .seeding import init_lda, init_mixture

    rng = np.random.default_rng(cfg.seed)
    if cfg.model == "gmm":
        n = units.shape[0]
        if cfg.K > n:
            raise UsageError(f"--K={cfg.K} exceeds the {n} observations")
        family = GaussianWishart.default_prior(units, cfg.nu_bar)
        return init_mixture(units, cfg.K, family, cfg.alpha_value, rng)[0]
    if cfg.K > units.n_docs:
        raise UsageError(f"--K={cfg.K} exceeds the {units.n_docs} documents")
    return init_lda(units, cfg.K, cfg.alpha_value, cfg.lambda_bar, rng)[0]


def make_task(cfg, units, heldout, g0):
    from .evaluation import make_completion_splits
    from .lda import LocalStepConfig
    from .train import LdaTask, MixtureTask

    if cfg.model == "gmm":
        return MixtureTask(units, g0.family, cfg.alpha_value, cfg.L_value, heldout,
                           workers=cfg.workers, deterministic=cfg.deterministic)
    splits = None if heldout is None else make_completion_splits(heldout, seed=cfg.seed)
    local = LocalStepConfig(L=cfg.L_value, max_iters=cfg.max_local_iters, conv_threshold=cfg.conv_threshold,
                            eps_active=cfg.eps_active, restarts=cfg.restarts)
    return LdaTask(units, cfg.alpha_value, cfg.lambda_bar, local, splits, cfg.warm_start,
                   workers=cfg.workers, deterministic=cfg.deterministic)


def _check_state_matches(cfg, g, units):
    from .lda import LdaGlobalState

    is_lda = isinstance(g, LdaGlobalState)
    if is_lda != (cfg.model == "lda"):
        raise UsageError("--init: snapshot family does not match --model")
    if g.K != cfg.K:
        raise UsageError(f"--init: snapshot has K={g.K}, config says K={cfg.K}")
    if is_lda and g.V != units.V:
        raise UsageError(f"--init: snapshot vocabulary {g.V} != data vocabulary {units.V}")
    if not is_lda and g.family.D != units.shape[1]:
        raise UsageError(f"--init: snapshot dimension {g.family.D} != data dimension {units.shape[1]}")


# ---------------------------------------------------------------------------
# commands

def cmd_train(args):
    from .train import LearningRateSchedule, run

    cfg = _resolve_config(args).validate()
    units = load_units(cfg.data, cfg.data_format, cfg.model)
    heldout = load_units(cfg.heldout, cfg.data_format, cfg.model, "--heldout") if cfg.heldout else None
    n_units = units.shape[0] if cfg.model == "gmm" else units.n_docs
    if cfg.batches > n_units:
        raise UsageError(f"--batches={cfg.batches} exceeds the {n_units} units")
    if cfg.init:
        if not os.path.exists(cfg.init):
            raise UsageError(f"--init: file not found: {cfg.init}")
        g0 = load_snapshot(cfg.init)[0]
        _check_state_matches(cfg, g0, units)
    else:
        g0 = initial_state(cfg, units)
    task = make_task(cfg, units, heldout, g0)
    trace = run(task, g0, cfg.alg, cfg.batches, cfg.laps, LearningRateSchedule(cfg.delta, cfg.kappa), cfg.seed)
    out = cfg.output or "lsparse-out"
    os.makedirs(out, exist_ok=True)
    resolved = cfg.resolved()
    trace.to_jsonl(os.path.join(out, "metrics.jsonl"), timings=not cfg.deterministic)
    if cfg.deterministic:
        with open(os.path.join(out, "timing.jsonl"), "w") as fh:
            for r in trace.rows:
                fh.write(json.dumps({"lap": r["lap"], "elapsed_sec": r["elapsed_sec"]}) + "\n")
    save_snapshot(os.path.join(out, "model.snap"), trace.state, resolved.to_dict())
    with open(os.path.join(out, "config.txt"), "w") as fh:
        fh.write(resolved.to_text())
    return 0


def evaluate_snapshot(snapshot, heldout_path, data_format="auto", seed=None):
    from .evaluation import doc_completion_score, make_completion_splits, mixture_heldout

    if not os.path.exists(snapshot):
        raise UsageError(f"--snapshot: file not found: {snapshot}")
    g, header = load_snapshot(snapshot)
    family = header["family"]
    model = "lda" if family == "lda" else "gmm"
    if family == "cat":
        raise UsageError("--snapshot: categorical mixtures have no heldout protocol")
    units = load_units(heldout_path, data_format, model, "--heldout")
    if model == "gmm":
        if units.shape[1] != g.family.D:
            raise UsageError(f"--heldout: dimension {units.shape[1]} does not match snapshot D={g.family.D}")
        return mixture_heldout(units, g)
    if units.V != g.V:
        raise UsageError(f"--heldout: vocabulary {units.V} does not match snapshot V={g.V}")
    cfg = header.get("config", {})
    if seed is None:
        seed = int(cfg.get("seed", 0))
    from .lda import LocalStepConfig

    local = LocalStepConfig(max_iters=int(cfg.get("max_local_iters", 100)),
                            conv_threshold=float(cfg.get("conv_threshold", 0.05)))
    return doc_completion_score(make_completion_splits(units, seed=seed), g.topic_means(), g.alpha, local)


def cmd_eval(args):
    rep = evaluate_snapshot(args.snapshot, args.heldout, args.data_format, args.seed)
    print(json.dumps(rep.as_row()))
    return 0


def _parse_grid(text, flag, allow_dense=False):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if allow_dense and tok.lower() == "dense":
            out.append(None)
            continue
        try:
            v = int(tok)
        except ValueError:
            raise UsageError(f"{flag}: cannot parse {tok!r}") from None
        if v < 1:
            raise UsageError(f"{flag}: values must be >= 1")
        out.append(v)
    return out


def cmd_bench(args):
    from .evaluation import bench, bench_lda

    Ks = _parse_grid(args.K, "--K")
    Ls = _parse_grid(args.L, "--L", allow_dense=True)
    if args.repeats < 1 or args.N < 1 or args.D < 1:
        raise UsageError("--N, --D and --repeats must be >= 1")
    rng = np.random.default_rng(args.seed)
    print("\t".join(["substep", "L", "K", "wall_sec", "exp_calls"]))
    for K in Ks:
        grid = [L for L in Ls if L is None or L <= K]
        if args.model == "gmm":
            from .data import make_gmm_data
            from .expfam import GaussianWishart
            from .mixture import global_step, summary_step

            X = make_gmm_data(args.N, args.D, min(K, 16), rng)[0]
            fam = GaussianWishart.default_prior(X)
            g = global_step(summary_step(X, rng.dirichlet(np.ones(K), size=args.N), fam), 10.0, fam)
            rows = bench(X, g, grid, args.repeats)
        else:
            from .data import make_lda_corpus
            from .lda import LdaGlobalState

            corpus, topics = make_lda_corpus(K, args.D, args.N, 100, rng)
            g = LdaGlobalState.from_lam(0.1 + 50 * topics * args.N / K, 0.5, 0.1)
            rows = bench_lda(corpus, g, grid, args.repeats)
        for r in rows:
            print("\t".join([r["substep"], str(r["L"]), str(r["K"]), f"{r['wall_sec']:.6g}", str(r["exp_calls"])]))
    return 0


def cmd_init(args):
    cfg = _resolve_config(args).validate()
    units = load_units(cfg.data, cfg.data_format, cfg.model)
    g = initial_state(cfg, units)
    out = cfg.output or "init.snap"
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_snapshot(out, g, cfg.resolved().to_dict())
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "bench": cmd_bench, "init": cmd_init}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, DataFormatError, SnapshotError) as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc):
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
