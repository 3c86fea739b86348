"""
moe-scaling command line.

Data goes to stdout (or --output, written atomically), diagnostics to stderr. Exit status is 0 on success, 1 on a
domain error and 2 on a usage error; --json-errors prints errors as {"error", "message", "exit_code"}.
"""
import argparse
import io
import json
import logging
import sys

import pandas as pd

from moeScaling.param import (
    SCHEMA_VERSION,
    defaultActiveExperts,
    defaultSharedExperts,
    defaultNCtx,
    defaultNVocab,
    defaultGranularity,
    defaultRatioTolerance,
    defaultBudgetTolerance,
    defaultStartCount,
    defaultSeed,
    defaultHuberDelta,
    rStarLossTolerance,
    lossLawVariantList,
    rTermModeList,
    paramCountModeList,
    trainingConventionList,
    defaultTrainingConvention,
    validPresetList,
    synthGridN,
    synthGridD,
    synthGridS,
    synthGridR,
)
from moeScaling.errors import ConfigError
from moeScaling.flops import ModelConfig, SparsityLevel, total_flops
from moeScaling.alloc import AllocationLaw, sparsity_coefficients, optimal_ratio
from moeScaling.scaling import read_records_csv, write_records_csv, predict_many
from moeScaling.fit import (
    extract_rstar,
    read_sweep_csv,
    read_rstar_csv,
    rstar_frame,
    fit_allocation_laws,
    fit_sparsity_laws,
    fit_loss_law,
    predict_vs_observed,
    FitReport,
)
from moeScaling.planner.io import atomic_write_text, dump_json, read_json
from moeScaling.planner.law_store import load_law_store, load_or_default, save_law_store
from moeScaling.planner.presets import preset
from moeScaling.planner.solver import PlanRequest, plan
from moeScaling.planner.synth import SynthGrid, synth

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(args, text):
    if getattr(args, "output", None):
        atomic_write_text(args.output, text)
        logger.info(f"[cli][_emit] wrote {args.output}")
    else:
        sys.stdout.write(text)


def _frame_csv(frame):
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def _request_sparsity(args):
    if args.sparsity is not None and args.experts is not None:
        raise ConfigError("give either --sparsity or --experts, not both")
    if args.sparsity is not None:
        return args.sparsity
    if args.experts is not None:
        return SparsityLevel.from_experts(args.experts, args.active_experts)
    raise ConfigError("one of --sparsity or --experts is required")


def _explicit_law(args):
    if (args.alpha_r is None) != (args.beta_r is None):
        raise ConfigError("--alpha-r and --beta-r must be given together")
    if args.alpha_r is None:
        return None
    return AllocationLaw(alpha_r=args.alpha_r, beta_r=args.beta_r, provenance="user")


# =-=-=-=-=-=-=-=-=-=-=- Commands =-=-=-=-=-=-=-=-=-=-=-=

def flops_command(args):
    cfg = ModelConfig.from_dict(read_json(args.config))
    breakdown = total_flops(cfg, training_convention=args.training_convention)
    if args.format == "csv":
        return f"{breakdown.csv_header()}\n{breakdown.to_csv_row()}\n"
    return dump_json(breakdown.to_dict())


def rstar_command(args):
    law = _explicit_law(args)
    S_value = None
    # an explicit law makes sparsity optional
    if law is None or args.sparsity is not None or args.experts is not None:
        S = _request_sparsity(args)
        S_value = float(S.fraction) if isinstance(S, SparsityLevel) else float(S)
    if law is None:
        store = load_law_store(args.law_store)
        law = store.allocation_law_for(S_value) or sparsity_coefficients(S, law=store.sparsity_law)
    r_star = optimal_ratio(law, args.compute)
    logger.info(f"[cli][rstar_command] alpha_r={law.alpha_r:.6g} beta_r={law.beta_r:.6g} ({law.provenance})")
    return dump_json({
        "schema_version": SCHEMA_VERSION,
        "compute": args.compute,
        "sparsity": S_value,
        "alpha_r": law.alpha_r,
        "beta_r": law.beta_r,
        "provenance": law.provenance,
        "r_star": r_star,
    })


def sweep_extract_command(args):
    observations = extract_rstar(read_sweep_csv(args.input), tolerance=args.tolerance)
    return _frame_csv(rstar_frame(observations))


def fit_powerlaw_command(args):
    fits = fit_allocation_laws(read_rstar_csv(args.input))
    if args.law_store:
        store = load_or_default(args.law_store)
        save_law_store(store.with_allocation_laws([law for law, _ in fits.values()]), args.law_store)
    return dump_json({
        "schema_version": SCHEMA_VERSION,
        "fits": [
            {"sparsity": S, "alpha_r": law.alpha_r, "beta_r": law.beta_r, "r_squared": fit.r_squared, "n_points": fit.n_points}
            for S, (law, fit) in fits.items()
        ],
    })


def fit_sparsity_command(args):
    store = load_or_default(args.law_store)
    if args.input:
        laws = [law for law, _ in fit_allocation_laws(read_rstar_csv(args.input)).values()]
    else:
        laws = list(store.allocation_laws)
    result = fit_sparsity_laws(laws)
    if args.law_store:
        save_law_store(store.with_sparsity_law(result.law), args.law_store)
    return dump_json({
        "schema_version": SCHEMA_VERSION,
        "sparsity_law": result.law.to_dict(),
        "alpha_r_squared": result.alpha_fit.r_squared,
        "beta_r_squared": result.beta_fit.r_squared,
    })


def fit_loss_command(args):
    report = fit_loss_law(
        read_records_csv(args.input),
        variant=args.variant,
        starts=args.starts,
        full_grid=args.full_grid,
        seed=args.seed,
        holdout_sparsity=args.holdout_sparsity,
        huber_delta=args.huber_delta,
        r_term_mode=args.r_term_mode,
        param_count=args.param_count,
        n_active_experts=args.active_experts,
        workers=args.workers,
        progress=args.progress,
    )
    if args.law_store:
        store = load_or_default(args.law_store)
        save_law_store(store.with_loss_coefficients(report.coefficients), args.law_store)
    return report.to_json() + "\n"


def predict_command(args):
    records = read_records_csv(args.input)
    if args.report:
        coef = FitReport.from_dict(read_json(args.report)).coefficients
    else:
        coef = load_law_store(args.law_store).loss_coefficients(args.variant)
        if coef is None:
            raise ConfigError(f"the law store holds no {args.variant} coefficients")

    if all(rec.loss is not None for rec in records):
        table = predict_vs_observed(coef, records, n_active_experts=args.active_experts)
        logger.info(f"[cli][predict_command] RMSE {table.rmse:.6g}, R^2 {table.r_squared:.6g}")
        return table.to_csv()

    predicted = predict_many(coef, records, n_active_experts=args.active_experts)
    return _frame_csv(pd.DataFrame({"label": [rec.label for rec in records], "predicted": predicted}))


def plan_command(args):
    n_layer, n_head = args.n_layer, args.n_head
    if args.preset:
        size = preset(args.preset)
        n_layer = n_layer or size.n_layer
        n_head = n_head or size.n_head
    if n_layer is None or n_head is None:
        raise ConfigError("--n-layer and --n-head are required unless --preset is given")

    req = PlanRequest(
        C_budget=args.compute,
        D=args.tokens,
        d_hidden=args.d_hidden,
        n_layer=n_layer,
        n_head=n_head,
        S=args.sparsity,
        n_experts=args.experts,
        e_act=args.active_experts,
        n_shared_experts=args.shared_experts,
        n_ctx=args.n_ctx,
        n_vocab=args.n_vocab,
        granularity=args.granularity,
        ratio_tolerance=args.ratio_tol,
        budget_tolerance=args.budget_tol,
        allocation_law=_explicit_law(args),
        per_token_target=args.per_token_target,
        use_gqa=args.use_gqa,
        kv_head_ratio=args.kv_head_ratio,
        use_peft=args.use_peft,
    )
    return dump_json(plan(req, law_store=load_law_store(args.law_store)).to_dict())


def synth_command(args):
    coef = load_law_store(args.law_store).loss_coefficients(args.variant)
    if coef is None:
        raise ConfigError(f"the law store holds no {args.variant} coefficients")
    grid = SynthGrid(N=tuple(args.N), D=tuple(args.D), S=tuple(args.S), r=tuple(args.r))
    return write_records_csv(synth(coef, grid, sigma=args.sigma, seed=args.seed))


def preset_command(args):
    return dump_json(preset(args.label).to_dict())


# =-=-=-=-=-=-=-=-=-=-=- Parser =-=-=-=-=-=-=-=-=-=-=-=

def _add_sparsity_args(parser):
    parser.add_argument("--sparsity", type=float, help="Sparsity S in [0, 1)")
    parser.add_argument("--experts", type=int, help="Total experts E, sparsity is (E - active) / E")
    parser.add_argument("--active-experts", type=int, default=defaultActiveExperts, help="Experts active per token, shared included")


def _add_law_args(parser):
    parser.add_argument("--alpha-r", type=float, help="Explicit allocation-law coefficient")
    parser.add_argument("--beta-r", type=float, help="Explicit allocation-law exponent")
    parser.add_argument("--law-store", help="Law store JSON (built-in published coefficients when omitted)")


def build_parser():
    parser = _Parser(prog="moe-scaling", description="Compute allocation for Mixture-of-Experts Transformers")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--json-errors", action="store_true", help="Print errors as JSON on stderr")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    flops_parser = subparsers.add_parser("flops", help="FLOPs breakdown of a model config")
    flops_parser.add_argument("--config", required=True, help="ModelConfig JSON")
    flops_parser.add_argument("--format", default="json", choices=["json", "csv"])
    flops_parser.add_argument("--training-convention", default=defaultTrainingConvention, choices=trainingConventionList)
    flops_parser.add_argument("--output", help="Write to this path instead of stdout")
    flops_parser.set_defaults(handler=flops_command)

    rstar_parser = subparsers.add_parser("rstar", help="Optimal expert/attention FLOPs ratio at a compute budget")
    rstar_parser.add_argument("--compute", type=float, required=True, help="Total training FLOPs")
    _add_sparsity_args(rstar_parser)
    _add_law_args(rstar_parser)
    rstar_parser.add_argument("--output", help="Write to this path instead of stdout")
    rstar_parser.set_defaults(handler=rstar_command)

    sweep_parser = subparsers.add_parser("sweep-extract", help="Extract r* from a C,S,r,loss sweep CSV")
    sweep_parser.add_argument("--input", required=True, help="Sweep CSV")
    sweep_parser.add_argument("--tolerance", type=float, default=rStarLossTolerance, help="Loss gap for accepting a suboptimal r")
    sweep_parser.add_argument("--output", help="Write to this path instead of stdout")
    sweep_parser.set_defaults(handler=sweep_extract_command)

    powerlaw_parser = subparsers.add_parser("fit-powerlaw", help="Fit r* = alpha_r C^beta_r per sparsity")
    powerlaw_parser.add_argument("--input", required=True, help="r* CSV from sweep-extract")
    powerlaw_parser.add_argument("--law-store", help="Law store JSON to update")
    powerlaw_parser.add_argument("--output", help="Write to this path instead of stdout")
    powerlaw_parser.set_defaults(handler=fit_powerlaw_command)

    sparsity_parser = subparsers.add_parser("fit-sparsity", help="Fit alpha_r(S), beta_r(S) as power laws of 1 - S")
    sparsity_parser.add_argument("--input", help="r* CSV; the law store's allocation laws are used when omitted")
    sparsity_parser.add_argument("--law-store", help="Law store JSON to read and update")
    sparsity_parser.add_argument("--output", help="Write to this path instead of stdout")
    sparsity_parser.set_defaults(handler=fit_sparsity_command)

    fit_parser = subparsers.add_parser("fit-loss", help="Multi-start fit of a loss law to RunRecord CSV")
    fit_parser.add_argument("--input", required=True, help="RunRecord CSV")
    fit_parser.add_argument("--variant", default="final", choices=lossLawVariantList)
    fit_parser.add_argument("--starts", type=int, default=defaultStartCount, help="Grid starts sampled")
    fit_parser.add_argument("--full-grid", action="store_true", help="Run every grid start")
    fit_parser.add_argument("--seed", type=int, default=defaultSeed)
    fit_parser.add_argument("--holdout-sparsity", type=float, help="Exclude this sparsity from fitting")
    fit_parser.add_argument("--huber-delta", type=float, default=defaultHuberDelta)
    fit_parser.add_argument("--r-term-mode", default="r", choices=rTermModeList)
    fit_parser.add_argument("--param-count", default="total", choices=paramCountModeList)
    fit_parser.add_argument("--active-experts", type=int, default=defaultActiveExperts)
    fit_parser.add_argument("--workers", type=int, default=1, help="Processes for the multi-start loop")
    fit_parser.add_argument("--progress", action="store_true", help="Show a progress bar")
    fit_parser.add_argument("--law-store", help="Law store JSON to update with the fitted coefficients")
    fit_parser.add_argument("--output", help="Write the FitReport to this path instead of stdout")
    fit_parser.set_defaults(handler=fit_loss_command)

    predict_parser = subparsers.add_parser("predict", help="Predict losses for RunRecord CSV")
    predict_parser.add_argument("--input", required=True, help="RunRecord CSV")
    predict_parser.add_argument("--report", help="FitReport JSON supplying the coefficients")
    predict_parser.add_argument("--law-store", help="Law store JSON supplying the coefficients")
    predict_parser.add_argument("--variant", default="final", choices=lossLawVariantList)
    predict_parser.add_argument("--active-experts", type=int, default=defaultActiveExperts)
    predict_parser.add_argument("--output", help="Write to this path instead of stdout")
    predict_parser.set_defaults(handler=predict_command)

    plan_parser = subparsers.add_parser("plan", help="Search d_hidden, d_expert for a compute budget")
    plan_parser.add_argument("--compute", type=float, required=True, help="Total training FLOPs")
    plan_parser.add_argument("--tokens", type=float, required=True, help="Training tokens")
    _add_sparsity_args(plan_parser)
    plan_parser.add_argument("--shared-experts", type=int, default=defaultSharedExperts)
    plan_parser.add_argument("--d-hidden", type=int, required=True, help="Seed hidden width")
    plan_parser.add_argument("--n-layer", type=int)
    plan_parser.add_argument("--n-head", type=int)
    plan_parser.add_argument("--preset", choices=validPresetList, help="Take n_layer and n_head from a size preset")
    plan_parser.add_argument("--n-ctx", type=int, default=defaultNCtx)
    plan_parser.add_argument("--n-vocab", type=int, default=defaultNVocab)
    plan_parser.add_argument("--granularity", type=int, default=defaultGranularity)
    plan_parser.add_argument("--ratio-tol", type=float, default=defaultRatioTolerance)
    plan_parser.add_argument("--budget-tol", type=float, default=defaultBudgetTolerance)
    plan_parser.add_argument("--per-token-target", type=float, help="Forward FLOPs per token, overrides the budget split")
    plan_parser.add_argument("--use-gqa", action="store_true")
    plan_parser.add_argument("--kv-head-ratio", type=int, default=1)
    plan_parser.add_argument("--use-peft", action="store_true")
    _add_law_args(plan_parser)
    plan_parser.add_argument("--output", help="Write to this path instead of stdout")
    plan_parser.set_defaults(handler=plan_command)

    synth_parser = subparsers.add_parser("synth", help="Generate synthetic RunRecord CSV from a loss law")
    synth_parser.add_argument("--N", type=float, nargs="+", default=synthGridN)
    synth_parser.add_argument("--D", type=float, nargs="+", default=synthGridD)
    synth_parser.add_argument("--S", type=float, nargs="+", default=synthGridS)
    synth_parser.add_argument("--r", type=float, nargs="+", default=synthGridR)
    synth_parser.add_argument("--sigma", type=float, default=0.0, help="Log-normal noise level")
    synth_parser.add_argument("--seed", type=int, default=defaultSeed)
    synth_parser.add_argument("--variant", default="final", choices=lossLawVariantList)
    synth_parser.add_argument("--law-store", help="Law store JSON supplying the coefficients")
    synth_parser.add_argument("--output", help="Write to this path instead of stdout")
    synth_parser.set_defaults(handler=synth_command)

    preset_parser = subparsers.add_parser("preset", help="Training hyperparameters of a size preset")
    preset_parser.add_argument("label", help=f"One of {validPresetList}")
    preset_parser.set_defaults(handler=preset_command)

    return parser


def _report_error(exc, exit_code, json_errors):
    if json_errors:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code}) + "\n")
    else:
        sys.stderr.write(f"error: {exc}\n")
    return exit_code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    json_errors = "--json-errors" in argv
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        if not json_errors:
            parser.print_usage(sys.stderr)
        return _report_error(exc, 2, json_errors)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s %(message)s")

    try:
        _emit(args, args.handler(args))
    except (ValueError, OSError) as exc:
        logger.debug(f"[cli][main] {args.command} failed", exc_info=True)
        return _report_error(exc, 1, json_errors)
    return 0


if __name__ == "__main__":
    sys.exit(main())
