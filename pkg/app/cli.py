"""
Batch command-line front end.

    python -m app fit --data survey.csv --schema schema.json --k 3 --out runs/fit
    python -m app select --data survey.csv --schema schema.json --k-range 1:4
    python -m app simulate static --design identified --n 2000 --out runs/sim
    python -m app summarize --run runs/fit
    python -m app regress --memberships runs/fit/memberships.csv --outcomes wages.csv \\
        --outcome lwage76 --treatment ed76 --controls exp76,exp762
    python -m app ics --scores 100,100,100,100,100
    python -m app rerun runs/fit/manifest.json

Every command writes manifest.json into its output directory. Failures print
one JSON object on stderr and exit non-zero.
"""

import argparse
import hashlib
import json
import logging
import subprocess
import sys
from collections.abc import Callable
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from app import __version__
from app.core.config import settings
from app.core.exceptions import AppException, InvalidModelConfiguration
from app.core.logging import setup_logging
from app.data import load_csv, rare_response_report, write_csv
from app.data.dataset import SurveyDataset
from app.posterior import (
    anchoring_diagnostic,
    compute_ics,
    ics_series,
    rank_questions_by_divergence,
    summarize,
    type_proportion_series,
)
from app.regress import (
    build_design,
    heterogeneous_intercepts,
    heterogeneous_returns,
    join_memberships,
    ols,
    spec_from_frame,
)
from app.sampler.distributions import RngStream
from app.sampler.engine import EstimationEngine
from app.sampler.priors import default_priors
from app.schemas import (
    DynamicConfig,
    ErrorPayload,
    IngestSchema,
    RunManifest,
    SgldSchedule,
    StaticConfig,
)
from app.selection import frequency_fit, max_identifiable_k, posterior_mean_params, select_k
from app.services import BaseArtifactStore, get_artifact_store
from app.simulate import (
    DESIGNS,
    Design,
    draw_true_params,
    recovery_experiment,
    recovery_frame,
    recovery_gap,
    simulate_dynamic,
    simulate_static,
)

UTC = timezone.utc
logger = logging.getLogger(__name__)


class RunContext:
    """Collects warnings and config echo for the manifest of one command."""

    def __init__(self, command: str, argv: list[str], seed: int | None = None):
        self.command = command
        self.argv = argv
        self.seed = seed
        self.config: dict[str, Any] = {}
        self.data_hash: str | None = None
        self.warnings: list[str] = []
        self.started_at = datetime.now(UTC).isoformat()

    def warn(self, messages: list[str] | str):
        self.warnings.extend([messages] if isinstance(messages, str) else messages)

    def manifest(self) -> RunManifest:
        return RunManifest(
            command=self.command,
            argv=self.argv,
            config=self.config,
            seed=self.seed,
            data_hash=self.data_hash,
            started_at=self.started_at,
            finished_at=datetime.now(UTC).isoformat(),
            software_version=__version__,
            git_revision=git_revision(),
            env=settings.ENV,
            warnings=self.warnings,
        )


def git_revision() -> str | None:
    try:
        result = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    if result.returncode != 0:
        return None
    return result.stdout.strip() or None


def hash_files(*paths: str | Path) -> str:
    """sha256 over the bytes of the given files, in order."""
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def parse_int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got '{value}'")


def compare_pair(values: list[int] | None, K: int) -> tuple[int, int]:
    """Two distinct 1-based types for the divergence ranking; defaults to (1, 2)."""
    pair = values or [1, 2]
    if len(pair) != 2 or pair[0] == pair[1] or not all(1 <= k <= K for k in pair):
        raise InvalidModelConfiguration(
            f"--compare needs two distinct types in 1..{K}, got {pair}"
        )
    return pair[0], pair[1]


def parse_float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got '{value}'")


def parse_k_range(value: str) -> list[int]:
    """'2:5' -> [2, 3, 4, 5]; a single integer gives a one-element range."""
    try:
        low, _, high = value.partition(":")
        low_k = int(low)
        high_k = int(high) if high else low_k
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected K range like '1:4', got '{value}'")
    if low_k < 1 or high_k < low_k:
        raise argparse.ArgumentTypeError(f"Empty or invalid K range '{value}'")
    return list(range(low_k, high_k + 1))


def load_inputs(args: argparse.Namespace, ctx: RunContext) -> SurveyDataset:
    schema = IngestSchema.from_json(args.schema).with_missing_policy(args.missing_policy)
    data = load_csv(args.data, schema)
    ctx.data_hash = hash_files(args.data, args.schema)
    rare = rare_response_report(data, settings.RARE_THRESHOLD)
    ctx.warn(
        [
            f"Rare response: question '{r.question}' category '{r.category}' at {r.frequency:.4f}"
            for r in rare
        ]
    )
    return data


def build_config(
    args: argparse.Namespace, data: SurveyDataset, K: int
) -> tuple[StaticConfig | DynamicConfig, list[str]]:
    """Sampler config for one K from the CLI flags and the anchored default priors."""
    alpha, eta, warnings = default_priors(
        data, K, eta_diag=args.eta_diag, eta_off=args.eta_off, alpha=args.alpha
    )
    chain = {"iterations": args.iterations, "burn_in": args.burn_in, "thin": args.thin}
    if data.mode == "dynamic":
        schedule = SgldSchedule(
            a=settings.SGLD_A if args.sgld_a is None else args.sgld_a,
            b=settings.SGLD_B if args.sgld_b is None else args.sgld_b,
            c=settings.SGLD_C if args.sgld_c is None else args.sgld_c,
        )
        config = DynamicConfig(
            K=K,
            eta=eta,
            v0=settings.V0 if args.v0 is None else args.v0,
            s0=settings.S0 if args.s0 is None else args.s0,
            schedule=schedule,
            batch_size=args.batch_size,
            **chain,
        )
    else:
        config = StaticConfig(K=K, alpha=alpha, eta=eta, **chain)
    return config, warnings


def counting_rule_warning(data: SurveyDataset, K: int) -> str | None:
    bound = max_identifiable_k(data.n_labels, data.n_questions, data.total_categories)
    if K > bound:
        message = (
            f"K={K} exceeds the counting-rule bound {bound} for G={data.n_labels}, "
            f"J={data.n_questions}, L={data.total_categories}; estimates may not be identified"
        )
        logger.warning(message)
        return message
    return None


def cmd_fit(args: argparse.Namespace, store: BaseArtifactStore, ctx: RunContext) -> None:
    data = load_inputs(args, ctx)
    if args.mode and args.mode != data.mode:
        raise InvalidModelConfiguration(
            f"--mode {args.mode} does not match the schema mode '{data.mode}'"
        )
    config, warnings = build_config(args, data, args.k)
    ctx.warn(warnings)
    advisory = counting_rule_warning(data, args.k)
    if advisory:
        ctx.warn(advisory)
    ctx.config = {"chains": args.chains, **config.echo()}

    draws, diagnostics = EstimationEngine().run(data, config, seed=args.seed, chains=args.chains)
    draws.config = config.echo()
    draws.rng = [RngStream(args.seed, c).metadata() for c in range(args.chains)]
    store.write_draws(draws, data)
    if diagnostics is not None:
        store.write_table("sgld_diagnostics.csv", diagnostics)


def cmd_select(args: argparse.Namespace, store: BaseArtifactStore, ctx: RunContext) -> None:
    data = load_inputs(args, ctx)
    prior_warnings: list[str] = []

    def make_config(K: int):
        config, warnings = build_config(args, data, K)
        prior_warnings.extend(warnings)
        return config

    report = select_k(
        data,
        args.k_range,
        make_config,
        seed=args.seed,
        chains=args.chains,
        scree_threshold=args.scree_threshold,
    )
    report.warnings.extend(prior_warnings)
    ctx.warn(report.warnings)
    ctx.config = {"k_range": args.k_range, "chains": args.chains}
    store.write_json("selection_report.json", report.model_dump(mode="json"))
    logger.info(f"Recommended K={report.recommended_k} (scree {report.k_scree})")


def _params_payload(params) -> dict[str, Any]:
    payload = {
        "pi_true": params.pi_true.tolist(),
        "beta_true": [b.tolist() for b in params.beta_true],
    }
    if params.pi_tilde is not None:
        payload["pi_tilde"] = params.pi_tilde.tolist()
        payload["sigma2"] = params.sigma2.tolist()
    return payload


def _write_dataset(store: BaseArtifactStore, data: SurveyDataset, params) -> None:
    write_csv(data, store.output_path("data.csv"))
    store.write_json("schema.json", data.to_schema().model_dump(mode="json"))
    store.write_json("true_params.json", _params_payload(params))


def _design(args: argparse.Namespace) -> Design:
    if args.design:
        return DESIGNS[args.design]
    return Design(G=args.groups, J=args.questions, n_categories=args.categories, K=args.k)


def cmd_simulate(args: argparse.Namespace, store: BaseArtifactStore, ctx: RunContext) -> None:
    ctx.config = {k: v for k, v in vars(args).items() if k != "handler"}
    rng = RngStream(args.seed)
    if args.kind == "static":
        design = _design(args)
        params = draw_true_params(design, rng)
        data = simulate_static(params, args.n, rng)
        _write_dataset(store, data, params)
    elif args.kind == "dynamic":
        design = _design(args).model_copy(update={"G": 1})
        params = draw_true_params(design, rng)
        data, realised = simulate_dynamic(params, args.n, args.sigma2, rng, T=args.periods)
        _write_dataset(store, data, realised)
    else:
        designs = list(DESIGNS) if args.design is None else [args.design]
        curves = {
            name: recovery_experiment(
                name,
                args.n_grid,
                args.reps,
                seed=args.seed,
                iterations=args.iterations,
                burn_in=args.burn_in,
            )
            for name in designs
        }
        for name, points in curves.items():
            store.write_table(f"recovery_{name}.csv", recovery_frame(points))
        if len(curves) == 2:
            gap = recovery_gap(curves["identified"], curves["under_identified"])
            store.write_json("recovery_gap.json", {"gap_at_largest_n": gap})


def cmd_summarize(args: argparse.Namespace, store: BaseArtifactStore, ctx: RunContext) -> None:
    source = get_artifact_store(args.run)
    draws, meta = source.read_draws()
    ctx.data_hash = hash_files(source.get_path("draws.parquet"))
    ctx.config = {"run": str(args.run), "level": args.level}
    estimates = summarize(draws, args.level)
    names = [q["name"] for q in meta["questions"]]

    payload = estimates.to_payload(names)
    diagnostic = anchoring_diagnostic(draws)
    payload["anchoring"] = {
        "question": names[diagnostic.question],
        "crossing_fraction": diagnostic.crossing_fraction.tolist(),
        "switching_suspected": diagnostic.switching_suspected,
    }
    if diagnostic.switching_suspected:
        ctx.warn(f"Possible label switching on question '{names[diagnostic.question]}'")
    if estimates.K > 1:
        k1, k2 = compare_pair(args.compare, estimates.K)
        payload["divergence"] = [
            {"question": q, "rao_distance": d}
            for q, d in rank_questions_by_divergence(estimates, k1 - 1, k2 - 1, names)
        ]
    if args.data and args.schema:
        data = load_inputs(args, ctx)
        beta, pi = posterior_mean_params(draws)
        payload["frequency_fit_error"] = frequency_fit(data, pi, beta)[1]
    store.write_json("summary.json", payload)
    store.write_table("memberships.csv", estimates.membership_frame(meta["ids"]))
    store.write_table("anchoring_trace.csv", diagnostic.to_frame())
    if draws.mode == "dynamic":
        series = type_proportion_series(draws, args.level)
        store.write_table("type_proportions.csv", series.to_frame(meta["label_values"]))


def cmd_regress(args: argparse.Namespace, store: BaseArtifactStore, ctx: RunContext) -> None:
    ctx.data_hash = hash_files(args.memberships, args.outcomes)
    ctx.config = {
        "outcome": args.outcome,
        "treatment": args.treatment,
        "controls": args.controls,
        "id_column": args.id_column,
    }
    joined = join_memberships(args.memberships, args.outcomes, args.id_column)
    spec = spec_from_frame(joined, args.outcome, args.treatment, args.controls)
    X, names = build_design(spec)
    fit = ols(spec.outcome, X, names)

    store.write_table("coefficients.csv", fit.to_frame())
    store.write_table("type_returns.csv", heterogeneous_returns(fit, spec.K, args.treatment))
    store.write_table("type_intercepts.csv", heterogeneous_intercepts(fit, spec.K))
    store.write_json(
        "coefficients.json",
        {
            "coefficients": dict(zip(fit.names, fit.coefficients.tolist(), strict=True)),
            "std_errors": dict(zip(fit.names, fit.standard_errors.tolist(), strict=True)),
            "r_squared": fit.r_squared,
            "n_obs": fit.n_obs,
            "se_type": fit.se_type,
        },
    )


def cmd_ics(args: argparse.Namespace, store: BaseArtifactStore, ctx: RunContext) -> None:
    if args.scores is not None:
        ctx.config = {"scores": args.scores}
        store.write_json("ics.json", {"ics": compute_ics(args.scores)})
        return
    if not (args.data and args.schema and args.coding):
        raise InvalidModelConfiguration("ics needs --scores or --data, --schema and --coding")
    data = load_inputs(args, ctx)
    coding = json.loads(Path(args.coding).read_text(encoding="utf-8"))
    ctx.config = {"coding": coding}
    series = ics_series(data, coding["favorable"], coding.get("unfavorable", {}))
    store.write_table("ics.csv", series.reset_index())


def cmd_rerun(args: argparse.Namespace) -> int:
    manifest = RunManifest(**json.loads(Path(args.manifest).read_text(encoding="utf-8")))
    if manifest.command == "rerun" or not manifest.argv:
        raise InvalidModelConfiguration("Manifest does not record a re-runnable command")
    logger.info(f"Re-running '{manifest.command}' from {args.manifest}")
    return main(manifest.argv)


def add_sampler_flags(parser: argparse.ArgumentParser, with_k: bool = True):
    parser.add_argument("--data", required=True, help="Survey CSV")
    parser.add_argument("--schema", required=True, help="Ingest schema JSON")
    if with_k:
        parser.add_argument("--k", type=int, required=True, help="Number of belief types")
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--burn-in", type=int, default=1000)
    parser.add_argument("--thin", type=int, default=1)
    parser.add_argument("--chains", type=int, default=1)
    parser.add_argument("--eta-diag", type=float, default=None)
    parser.add_argument("--eta-off", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--v0", type=float, default=None)
    parser.add_argument("--s0", type=float, default=None)
    parser.add_argument("--sgld-a", type=float, default=None)
    parser.add_argument("--sgld-b", type=float, default=None)
    parser.add_argument("--sgld-c", type=float, default=None)
    parser.add_argument("--batch-size", type=int, default=None, help="SGLD mini-batch size")
    parser.add_argument(
        "--missing-policy", choices=["drop-from-likelihood", "own-category"], default=None
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="Output directory (default OUTPUT_DIR)")
    common.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    common.add_argument("--log-level", default=None)
    common.add_argument("--log-format", choices=["json", "text"], default=None)

    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        allow_abbrev=False,
        description="Hierarchical latent class estimation for categorical surveys.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser(
        "fit", parents=[common], allow_abbrev=False, help="Run the static or dynamic sampler"
    )
    fit.add_argument("--mode", choices=["static", "dynamic"], default=None)
    add_sampler_flags(fit)
    fit.set_defaults(handler=cmd_fit)

    select = subparsers.add_parser(
        "select", parents=[common], allow_abbrev=False, help="Choose the number of types"
    )
    add_sampler_flags(select, with_k=False)
    select.add_argument("--k-range", type=parse_k_range, required=True, help="e.g. 1:4")
    select.add_argument("--scree-threshold", type=float, default=None)
    select.set_defaults(handler=cmd_select)

    simulate = subparsers.add_parser(
        "simulate", parents=[common], allow_abbrev=False, help="Synthetic data and recovery"
    )
    simulate.add_argument("kind", choices=["static", "dynamic", "recovery"])
    simulate.add_argument("--design", choices=list(DESIGNS), default=None)
    simulate.add_argument("--groups", type=int, default=5)
    simulate.add_argument("--questions", type=int, default=4)
    simulate.add_argument("--categories", type=int, default=5)
    simulate.add_argument("--k", type=int, default=3)
    simulate.add_argument("--n", type=int, default=500, help="Respondents per group or period")
    simulate.add_argument("--periods", type=int, default=20)
    simulate.add_argument("--sigma2", type=float, default=0.05)
    simulate.add_argument("--n-grid", type=parse_int_list, default=[500, 2000, 5000])
    simulate.add_argument("--reps", type=int, default=20)
    simulate.add_argument("--iterations", type=int, default=1000)
    simulate.add_argument("--burn-in", type=int, default=500)
    simulate.set_defaults(handler=cmd_simulate)

    summary = subparsers.add_parser(
        "summarize", parents=[common], allow_abbrev=False, help="Summarize a fit run"
    )
    summary.add_argument("--run", required=True, help="Directory holding draws.parquet")
    summary.add_argument("--level", type=float, default=None)
    summary.add_argument("--compare", type=parse_int_list, default=None, help="Two types, e.g. 1,2")
    summary.add_argument("--data", default=None, help="Survey CSV for the frequency-fit check")
    summary.add_argument("--schema", default=None)
    summary.add_argument(
        "--missing-policy", choices=["drop-from-likelihood", "own-category"], default=None
    )
    summary.set_defaults(handler=cmd_summarize)

    regress = subparsers.add_parser(
        "regress", parents=[common], allow_abbrev=False, help="Two-step heterogeneous effects"
    )
    regress.add_argument("--memberships", required=True)
    regress.add_argument("--outcomes", required=True)
    regress.add_argument("--outcome", required=True)
    regress.add_argument("--treatment", required=True)
    regress.add_argument("--controls", type=lambda v: [c for c in v.split(",") if c], default=[])
    regress.add_argument("--id-column", default="id")
    regress.set_defaults(handler=cmd_regress)

    ics = subparsers.add_parser(
        "ics", parents=[common], allow_abbrev=False, help="Index of consumer sentiment"
    )
    ics.add_argument("--scores", type=parse_float_list, default=None)
    ics.add_argument("--data", default=None)
    ics.add_argument("--schema", default=None)
    ics.add_argument("--coding", default=None, help="JSON with favorable/unfavorable codes")
    ics.add_argument(
        "--missing-policy", choices=["drop-from-likelihood", "own-category"], default=None
    )
    ics.set_defaults(handler=cmd_ics)

    rerun = subparsers.add_parser(
        "rerun", parents=[common], allow_abbrev=False, help="Repeat a run from its manifest"
    )
    rerun.add_argument("manifest")
    rerun.set_defaults(handler=None)
    return parser


def _error_payload(error: Exception) -> tuple[ErrorPayload, int]:
    if isinstance(error, AppException):
        return ErrorPayload(**error.to_payload()), error.exit_code
    if isinstance(error, ValidationError):
        errors = [{"loc": list(e["loc"]), "msg": e["msg"]} for e in error.errors()]
        return (
            ErrorPayload(error="ValidationError", message=str(error), details={"errors": errors}),
            2,
        )
    return ErrorPayload(error="InternalError", message=str(error)), 1


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level, args.log_format)

    try:
        if args.command == "rerun":
            return cmd_rerun(args)
        handler: Callable = args.handler
        store = get_artifact_store(args.out)
        ctx = RunContext(args.command, argv, seed=args.seed)
        handler(args, store, ctx)
        store.write_manifest(ctx.manifest())
        logger.info(f"'{args.command}' finished; outputs in {getattr(store, 'output_dir', args.out)}")
        return 0
    except Exception as e:
        payload, exit_code = _error_payload(e)
        log = logger.error if exit_code != 1 else logger.exception
        log(f"{payload.error}: {payload.message}")
        print(json.dumps(payload.model_dump(), default=str), file=sys.stderr)
        return exit_code


if __name__ == "__main__":
    raise SystemExit(main())
