#!/usr/bin/env python
"""
otalign CLI - Command Line Interface

Every command reads JSON files, writes JSON to stdout and logs to stderr.

Usage:
    otalign sinkhorn COST_FILE [--lambda L] [--tol T] [--max-iters K]
    otalign oracle COST_FILE [--method flow|lp|permutation]
    otalign align STUDENT TEACHER [--student-hidden F --teacher-hidden F] [--proj SEED|FILE]
    otalign ccot QUAD_FILE [--proj SEED] [--alpha A]
    otalign checkgrad [STUDENT TEACHER] [--h H] [--proj SEED|FILE]
    otalign train [--config FILE] [--ablation NAME] [--steps N]
    otalign tokenize TEXT [--kind char|pair]

Exit codes:
    0  success
    1  input or configuration error
    2  Sinkhorn did not converge (or a gradient check failed)
    3  training diverged (NaN loss)
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from otalign import __version__
from otalign.caching import TeacherCache
from otalign.config import get_settings, load_dotenv_if_exists
from otalign.core.alignment import ReprBundle, finite_diff_check, layer_ot_loss, ot_loss
from otalign.core.cost import Projection
from otalign.core.objective import ProjectionSet, ccot_breakdown, ot_kd_loss
from otalign.core.oracles import exact_ot, lp_ot, permutation_oracle
from otalign.core.transport import sinkhorn, uniform_measure
from otalign.distill.tokenizers import make_tokenizer
from otalign.distill.trainer import ABLATIONS, ablation_config, train_run
from otalign.exceptions import DivergenceError, OTAlignError, UnsupportedProblemError
from otalign.io.formats import (
    canonical_json,
    load_cost_file,
    load_json,
    load_quad_file,
    load_seq_file,
    parse_matrix,
)
from otalign.io.run_config import RunConfig, load_run_config, make_projections
from otalign.monitoring import StepRecord, TrainingMonitor

logger = logging.getLogger("otalign.cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_DIVERGED = 3

LOG_FORMAT = "%(asctime)s | %(name)s | %(levelname)s | %(message)s"


# =============================================================================
# Helpers
# =============================================================================

def configure_logging(verbosity: int, default_level: str) -> None:
    """Route logging to stderr; -v means INFO, -vv DEBUG."""
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = getattr(logging, default_level, logging.WARNING)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def emit(obj: Any) -> None:
    """Write one canonical JSON document (one line) to stdout."""
    sys.stdout.write(canonical_json(obj) + "\n")
    sys.stdout.flush()


def sinkhorn_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "lam": getattr(args, "lam", None),
        "tol": getattr(args, "tol", None),
        "max_iters": getattr(args, "max_iters", None),
        "log_domain": getattr(args, "log_domain", None),
    }


def resolve_projections(
    source: Optional[str],
    emb_dims: tuple,
    hid_dims: Optional[tuple] = None,
    run_cfg: Optional[RunConfig] = None,
) -> ProjectionSet:
    """
    Projections from ``--proj``: an integer seed or a JSON file.

    A file holds either one SeqFile (embedding layer) or an object
    ``{"embedding": SeqFile, "hidden": SeqFile}``. Without ``--proj`` the
    config file's ``objective.projection_seed`` is used when it is set;
    otherwise no projections are drawn.
    """
    env_seed = get_settings().seed
    if source is None:
        if run_cfg is None or run_cfg.objective.projection_seed is None:
            return ProjectionSet()
        return make_projections(emb_dims, hid_dims or (1, 1), run_cfg.projection_seed(env_seed))
    try:
        seed = int(source)
    except ValueError:
        seed = None

    if seed is not None:
        seed = env_seed if env_seed is not None else seed
        return make_projections(emb_dims, hid_dims or (1, 1), seed)

    obj = load_json(source)
    proj = ProjectionSet()
    if isinstance(obj, dict) and ("embedding" in obj or "hidden" in obj):
        for key in ("embedding", "hidden"):
            if key in obj:
                _, weights = parse_matrix(obj[key], source, key)
                setattr(proj, key, Projection(weights))
    else:
        _, weights = parse_matrix(obj, source, "")
        proj.embedding = Projection(weights)
    return proj


def add_sinkhorn_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("sinkhorn")
    group.add_argument("--lambda", dest="lam", type=float, help="Regularization strength (default: 50)")
    group.add_argument("--tol", type=float, help="Marginal tolerance (default: 1e-9)")
    group.add_argument("--max-iters", type=int, help="Iteration cap (default: 10000)")
    group.add_argument(
        "--log-domain",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Log-domain updates (default: on)",
    )
    group.add_argument("--config", help="RunConfig JSON file; flags override its values")


# =============================================================================
# Commands
# =============================================================================

def cmd_sinkhorn(args: argparse.Namespace) -> int:
    """Solve entropic OT for a cost file."""
    cfg = load_run_config(args.config).sinkhorn_config(sinkhorn_overrides(args))
    problem = load_cost_file(args.cost_file)
    n, m = problem.cost.shape
    alpha = problem.alpha if problem.alpha is not None else uniform_measure(n)
    beta = problem.beta if problem.beta is not None else uniform_measure(m)
    result = sinkhorn(problem.cost, alpha, beta, cfg)
    emit(result.to_dict())
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_oracle(args: argparse.Namespace) -> int:
    """Exact OT cost of a cost file."""
    problem = load_cost_file(args.cost_file)
    n, m = problem.cost.shape
    if args.method == "permutation":
        if problem.alpha is not None or problem.beta is not None:
            raise UnsupportedProblemError("permutation", "only uniform marginals are supported")
        emit({"cost": permutation_oracle(problem.cost), "method": "permutation", "plan": None})
        return EXIT_OK

    alpha = problem.alpha if problem.alpha is not None else uniform_measure(n)
    beta = problem.beta if problem.beta is not None else uniform_measure(m)
    solver = exact_ot if args.method == "flow" else lp_ot
    result = solver(problem.cost, alpha, beta)
    emit(result.to_dict())
    return EXIT_OK


def cmd_align(args: argparse.Namespace) -> int:
    """Layer-wise (or single-layer) OT alignment loss of two sequences."""
    run_cfg = load_run_config(args.config)
    cfg = run_cfg.sinkhorn_config(sinkhorn_overrides(args))
    _, s_emb = load_seq_file(args.student)
    _, t_emb = load_seq_file(args.teacher)

    if (args.student_hidden is None) != (args.teacher_hidden is None):
        logger.error("--student-hidden and --teacher-hidden must be given together")
        return EXIT_INPUT

    if args.student_hidden is None:
        proj = resolve_projections(args.proj, (t_emb.shape[1], s_emb.shape[1]), run_cfg=run_cfg)
        loss, plan = ot_loss(s_emb, t_emb, proj.embedding, cfg)
        emit({
            "loss": loss,
            "emb_loss": loss,
            "hid_loss": None,
            "emb_projected": proj.embedding is not None,
            "converged": plan.converged,
            "iterations": plan.iterations,
            "config": cfg.to_dict(),
        })
        return EXIT_OK if plan.converged else EXIT_NOT_CONVERGED

    _, s_hid = load_seq_file(args.student_hidden)
    _, t_hid = load_seq_file(args.teacher_hidden)
    proj = resolve_projections(
        args.proj, (t_emb.shape[1], s_emb.shape[1]), (t_hid.shape[1], s_hid.shape[1]), run_cfg
    )
    report = layer_ot_loss(
        ReprBundle(s_emb, s_hid, "student"),
        ReprBundle(t_emb, t_hid, "teacher"),
        proj.embedding,
        proj.hidden,
        cfg,
        max_workers=get_settings().max_workers,
    )
    emit(report.to_dict())
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_ccot(args: argparse.Namespace) -> int:
    """Cross-CoT loss breakdown of a quad file."""
    run_cfg = load_run_config(args.config)
    quad, file_proj = load_quad_file(args.quad_file)
    if file_proj is not None:
        proj = file_proj
    else:
        proj = resolve_projections(
            args.proj,
            (quad.t_raw.embeddings.shape[1], quad.s_raw.embeddings.shape[1]),
            (quad.t_raw.hiddens.shape[1], quad.s_raw.hiddens.shape[1]),
            run_cfg,
        )

    obj_overrides = {"alpha": args.alpha, "max_workers": get_settings().max_workers}
    cfg = run_cfg.objective_config(obj_overrides, sinkhorn_overrides(args))
    cfg.projections = proj
    report = ccot_breakdown(quad, cfg)
    emit({
        "ccot": report.total,
        "cst": report.cst,
        "crc": report.crc,
        "ot_kd": ot_kd_loss(quad, cfg),
        "emb_ot": report.emb,
        "hid_ot": report.hid,
        "converged": report.converged,
    })
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_checkgrad(args: argparse.Namespace) -> int:
    """Finite-difference check of the frozen-plan student gradient."""
    run_cfg = load_run_config(args.config)
    cfg = run_cfg.sinkhorn_config(sinkhorn_overrides(args))
    if (args.student is None) != (args.teacher is None):
        logger.error("Give both STUDENT and TEACHER files, or neither")
        return EXIT_INPUT

    if args.student is None:
        env_seed = get_settings().seed
        rng = np.random.default_rng(env_seed if env_seed is not None else args.seed)
        x = rng.normal(size=(4, 3))
        y = rng.normal(size=(5, 3))
    else:
        _, x = load_seq_file(args.student)
        _, y = load_seq_file(args.teacher)

    proj = resolve_projections(args.proj, (y.shape[1], x.shape[1]), run_cfg=run_cfg)
    report = finite_diff_check(x, y, proj.embedding, cfg, h=args.h)
    emit(report.to_dict())
    return EXIT_OK if report.passed else EXIT_NOT_CONVERGED


def cmd_train(args: argparse.Namespace) -> int:
    """Toy distillation run streaming one JSON record per step."""
    settings = get_settings()
    run_cfg: RunConfig = load_run_config(args.config)
    overrides = {
        "steps": args.steps,
        "alpha": args.alpha,
        "lr": args.lr,
        "seed": args.seed,
        "batch": args.batch,
        "lam": args.lam,
        "max_workers": settings.max_workers if settings.max_workers > 1 else None,
    }
    cfg = run_cfg.train_config(overrides, env_seed=settings.seed)
    if args.ablation:
        cfg = ablation_config(args.ablation, cfg)

    def stream(rec: StepRecord) -> None:
        emit(rec.to_dict())

    cache = TeacherCache(settings.cache_dir) if settings.cache_dir is not None else None
    per_epoch = -(-cfg.dataset_size // cfg.batch)
    monitor = TrainingMonitor(per_epoch, records_file=args.records, on_record=stream)
    log = train_run(cfg, monitor=monitor, cache=cache)

    summary = dict(log.summary)
    summary["epoch_total"] = monitor.epoch_averages("total")
    summary["epoch_ot"] = monitor.epoch_averages("ot")
    emit({"summary": summary})
    if args.summary:
        with open(args.summary, "w") as f:
            f.write(canonical_json(summary) + "\n")

    if log.aborted:
        raise DivergenceError(log.abort_step if log.abort_step is not None else -1, float("nan"))
    return EXIT_OK


def cmd_tokenize(args: argparse.Namespace) -> int:
    """Encode text with a toy tokenizer and show the round trip."""
    tokenizer = make_tokenizer(args.kind)
    ids = tokenizer.encode(args.text)
    decoded = tokenizer.decode(ids)
    emit({
        "kind": tokenizer.kind,
        "vocab_size": tokenizer.size,
        "ids": ids,
        "symbols": tokenizer.symbols(ids),
        "text": decoded,
        "round_trip": decoded == args.text,
    })
    return EXIT_OK


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otalign",
        description="otalign - OT sequence alignment for cross-tokenizer distillation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s sinkhorn cost.json --lambda 200
  %(prog)s oracle cost.json --method flow
  %(prog)s align student.json teacher.json --proj 0
  %(prog)s ccot quad.json
  %(prog)s checkgrad --h 1e-5
  %(prog)s train --config configs/default_run.json --ablation cst
  %(prog)s tokenize "abab<sep>" --kind pair
        """,
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--version", action="version", version=f"otalign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sinkhorn", help="Entropic OT plan for a cost matrix")
    p.add_argument("cost_file", help="Cost JSON (SeqFile, {'cost': ...} or nested list)")
    add_sinkhorn_flags(p)
    p.set_defaults(handler=cmd_sinkhorn)

    p = sub.add_parser("oracle", help="Exact OT cost for a cost matrix")
    p.add_argument("cost_file")
    p.add_argument("--method", choices=["flow", "lp", "permutation"], default="flow")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("align", help="OT alignment loss between student and teacher sequences")
    p.add_argument("student", help="Student embedding SeqFile")
    p.add_argument("teacher", help="Teacher embedding SeqFile")
    p.add_argument("--student-hidden", help="Student hidden SeqFile (enables layer-wise mode)")
    p.add_argument("--teacher-hidden", help="Teacher hidden SeqFile")
    p.add_argument("--proj", help="Projection seed (integer) or projection JSON file")
    add_sinkhorn_flags(p)
    p.set_defaults(handler=cmd_align)

    p = sub.add_parser("ccot", help="Cross-CoT loss breakdown for a quad file")
    p.add_argument("quad_file")
    p.add_argument("--proj", help="Projection seed used when the file carries no projections")
    p.add_argument("--alpha", type=float, help="Objective weight echoed into the config")
    add_sinkhorn_flags(p)
    p.set_defaults(handler=cmd_ccot)

    p = sub.add_parser("checkgrad", help="Finite-difference gradient check")
    p.add_argument("student", nargs="?", help="Student SeqFile (default: random 4x3)")
    p.add_argument("teacher", nargs="?", help="Teacher SeqFile (default: random 5x3)")
    p.add_argument("--h", type=float, default=1e-5, help="Finite-difference step (default: 1e-5)")
    p.add_argument("--seed", type=int, default=0, help="Seed for the random instance")
    p.add_argument("--proj", help="Projection seed (integer) or projection JSON file")
    add_sinkhorn_flags(p)
    p.set_defaults(handler=cmd_checkgrad)

    p = sub.add_parser("train", help="Toy distillation run (JSON lines on stdout)")
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--ablation", choices=sorted(ABLATIONS), help="Named ablation preset")
    p.add_argument("--steps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--records", help="Also append records to this JSONL file")
    p.add_argument("--summary", help="Also write the final summary to this file")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("tokenize", help="Encode text with a toy tokenizer")
    p.add_argument("text")
    p.add_argument("--kind", choices=["char", "pair"], default="char")
    p.set_defaults(handler=cmd_tokenize)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    load_dotenv_if_exists()
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        configure_logging(args.verbose, get_settings().log_level)
        return args.handler(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OTAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
