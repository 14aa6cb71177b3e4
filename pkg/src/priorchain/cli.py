"""Operator command line: simulate, oracle-check, recover, eval, serve.

One JSON config format is shared by all commands; flags override file values.
All randomness comes from config seeds, so identical config plus seeds gives
byte-identical outputs (wall-clock metadata lives only in a sidecar file).

Exit codes: 0 success, 1 usage error, 2 data error, 3 tolerance failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .chain import SampleRecord, init_chain, log_header, read_log, run_chain_logged, write_log
from .cohort import CohortSettings, build_run_config
from .config import (
    RunConfig,
    participant_chain_seed,
    participant_choice_seed,
)
from .core import RngStream, derive_seed
from .errors import (
    EmptyError,
    InvalidConfigError,
    MalformedLogError,
    NotDiscreteError,
    PriorChainError,
)
from .evaluation import (
    PredictorSpec,
    accuracy,
    average_prior,
    choice_trials_from_model,
    confidence_correlation,
    ecological_prior,
    labeled_set_from_model,
    select_ambiguous,
    sensitivity_check,
)
from .oracle import analytic_recovery_check, canonical_config
from .participant import ParticipantModel
from .recovery import PriorEstimate, acceptance_stats, reweight
from .stimulus import enumerate_stimuli

USAGE_ERROR = 1
DATA_ERROR = 2
TOLERANCE_ERROR = 3


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc


def _dump_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


# ---------------------------------------------------------------- simulate

def _simulate_one_chain(args: tuple) -> tuple[int, int, dict, list[dict]]:
    """Worker: run one (participant, chain) pair; returns its log document."""
    config_dict, p_idx, c_idx = args
    config = RunConfig.from_dict(config_dict)
    session = config.session
    participant = config.participants[p_idx]
    start = session.start_categories[c_idx]
    seed = participant_chain_seed(session.seed, p_idx, c_idx)
    state = init_chain(
        start, session.gatekeeper, session.budget, RngStream(seed), chain_id=f"c{c_idx}"
    )
    state, lines = run_chain_logged(
        state,
        participant,
        config.trials_per_chain,
        session.gatekeeper,
        session.budget,
        RngStream(participant_choice_seed(session.seed, p_idx, c_idx)),
    )
    header = log_header(
        f"c{c_idx}",
        start,
        seed,
        extra={
            "participant": participant.label,
            "categories": list(session.categories.labels),
            "init_sample": state.samples[0].to_dict(),
            "stats": acceptance_stats(state),
        },
    )
    return p_idx, c_idx, header, lines


def cmd_simulate(args) -> int:
    config_dict = _load_config(args.config)
    config = RunConfig.from_dict(config_dict)
    out_dir = Path(args.out or config_dict.get("out_dir") or "out")
    session = config.session

    tasks = [
        (config_dict, p_idx, c_idx)
        for p_idx in range(len(config.participants))
        for c_idx in range(len(session.start_categories))
    ]
    t0 = time.time()
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool_exec:
            results = list(pool_exec.map(_simulate_one_chain, tasks))
    else:
        results = [_simulate_one_chain(t) for t in tasks]

    by_participant: dict[int, list] = {}
    for p_idx, c_idx, header, lines in results:
        by_participant.setdefault(p_idx, []).append((c_idx, header, lines))

    n_cats = len(session.categories)
    for p_idx, chunks in sorted(by_participant.items()):
        participant = config.participants[p_idx]
        log_dir = out_dir / "logs" / participant.label
        log_dir.mkdir(parents=True, exist_ok=True)
        all_samples: list[SampleRecord] = []
        dropped = 0
        for c_idx, header, lines in sorted(chunks):
            write_log(log_dir / f"c{c_idx}.jsonl", header, lines)
            samples = _samples_from_log(header, lines)
            cut = int(len(samples) * session.burn_in_fraction)
            dropped += cut
            all_samples.extend(samples[cut:])
        estimate = reweight(all_samples, 0, n_cats, session.categories.labels)
        doc = estimate.to_dict()
        doc["burn_in"] = dropped
        _dump_json(out_dir / "priors" / f"{participant.label}.prior.json", doc)

    _dump_json(
        out_dir / "manifest.json",
        {"schema": 1, "config": config_dict, "participants": [p.label for p in config.participants]},
    )
    _dump_json(out_dir / "run_meta.json", {"wall_time_s": time.time() - t0})
    print(f"simulated {len(config.participants)} participants "
          f"x {len(session.start_categories)} chains -> {out_dir}")
    return 0


def _samples_from_log(header: dict, lines: list[dict]) -> list[SampleRecord]:
    if "init_sample" not in header:
        raise MalformedLogError("log header lacks init_sample")
    samples = [SampleRecord.from_dict(header["init_sample"])]
    for line in lines:
        if line.get("sample") is not None:
            samples.append(SampleRecord.from_dict(line["sample"]))
    return samples


# ------------------------------------------------------------ oracle-check

def cmd_oracle_check(args) -> int:
    if args.config:
        config = RunConfig.from_dict(_load_config(args.config))
        session = config.session
        if not session.space.is_discrete:
            raise NotDiscreteError("oracle-check requires a discrete space")
        space, participant, gatekeeper = (
            session.space,
            config.participants[0],
            session.gatekeeper,
        )
    else:
        space, participant, gatekeeper = canonical_config()
    report = analytic_recovery_check(space, participant, gatekeeper)
    print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    ok = report.joint_tv_gap <= args.tol_joint and report.prior_tv_gap <= args.tol_prior
    if not ok:
        print(
            f"tolerance exceeded: joint gap {report.joint_tv_gap:.3e} "
            f"(<= {args.tol_joint}), prior gap {report.prior_tv_gap:.3e} "
            f"(<= {args.tol_prior})",
            file=sys.stderr,
        )
        return TOLERANCE_ERROR
    return 0


# ----------------------------------------------------------------- recover

def cmd_recover(args) -> int:
    path = Path(args.log)
    if path.is_dir():
        files = sorted(path.glob("*.jsonl"))
        if not files:
            raise MalformedLogError(f"no .jsonl logs under {path}")
    else:
        files = [path]
    all_samples: list[SampleRecord] = []
    labels = None
    dropped = 0
    for file in files:
        header, lines = read_log(file)
        labels = header.get("categories", labels)
        samples = _samples_from_log(header, lines)
        cut = int(len(samples) * args.burn_in_fraction)
        dropped += cut
        all_samples.extend(samples[cut:])
    if not all_samples:
        raise EmptyError("burn-in removed every sample")
    n_cats = len(labels) if labels else max(s.e for s in all_samples) + 1
    estimate = reweight(all_samples, 0, n_cats, labels)
    doc = estimate.to_dict()
    doc["burn_in"] = dropped
    out = json.dumps(doc, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(out + "\n")
    print(out)
    return 0


# -------------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    config_dict = _load_config(args.config)
    config = RunConfig.from_dict(config_dict)
    session = config.session
    eval_cfg = config_dict.get("eval")
    if not eval_cfg:
        raise InvalidConfigError("config lacks an 'eval' section")
    priors_dir = Path(args.priors_dir)
    if not priors_dir.is_dir():
        raise MalformedLogError(f"priors directory {priors_dir} not found")

    recovered: dict[str, PriorEstimate] = {}
    for participant in config.participants:
        prior_path = priors_dir / f"{participant.label}.prior.json"
        if not prior_path.exists():
            raise MalformedLogError(f"missing prior file {prior_path}")
        recovered[participant.label] = PriorEstimate.from_dict(
            json.loads(prior_path.read_text())
        )

    reference = ParticipantModel.from_dict(eval_cfg["reference"])
    threshold = float(eval_cfg.get("ambiguous_threshold", 0.25))
    stimuli = enumerate_stimuli(session.space)
    ambiguous = select_ambiguous(session.gatekeeper, stimuli, threshold)
    labeled = labeled_set_from_model(
        reference,
        session.gatekeeper,
        int(eval_cfg.get("labeled_set_draws", 450)),
        float(eval_cfg.get("clear_network_min", 0.6)),
        RngStream(derive_seed(session.seed, "labeled_set")),
    )

    network = PredictorSpec.network()
    avg = average_prior([recovered[p.label] for p in config.participants])
    predictors_extra = {}
    if eval_cfg.get("ecological_counts"):
        predictors_extra["ecological"] = ecological_prior(
            eval_cfg["ecological_counts"], session.categories.labels
        )

    rows = []
    for i, participant in enumerate(config.participants):
        trials = choice_trials_from_model(
            participant, ambiguous, RngStream(derive_seed(session.seed, "choices", i))
        )
        choice_targets = [(f, chosen) for f, chosen, _ in trials]
        prior_i = recovered[participant.label].probs
        fused_i = PredictorSpec.fused(prior_i, f"individual:{participant.label}")
        row = {
            "participant": participant.label,
            "acc_network": accuracy(network, session.gatekeeper, choice_targets),
            "acc_prior_only": accuracy(
                PredictorSpec.prior_only(prior_i), session.gatekeeper, choice_targets
            ),
            "acc_individual_fused": accuracy(fused_i, session.gatekeeper, choice_targets),
            "acc_average_fused": accuracy(
                PredictorSpec.fused(avg, "average"), session.gatekeeper, choice_targets
            ),
            "r_network": confidence_correlation(network, session.gatekeeper, trials),
            "r_individual_fused": confidence_correlation(fused_i, session.gatekeeper, trials),
        }
        if labeled:
            sens = sensitivity_check(fused_i, session.gatekeeper, labeled)
            row["sens_delta"] = sens["delta"]
            row["sens_accuracy"] = sens["accuracy"]
            row["sens_prior_only_accuracy"] = accuracy(
                PredictorSpec.prior_only(prior_i), session.gatekeeper, labeled
            )
        if "ecological" in predictors_extra:
            row["acc_ecological_fused"] = accuracy(
                PredictorSpec.fused(predictors_extra["ecological"], "ecological"),
                session.gatekeeper,
                choice_targets,
            )
        rows.append(row)

    keys = [k for k in rows[0] if k != "participant"]
    report = {
        "schema": 1,
        "n_ambiguous": len(ambiguous),
        "n_labeled": len(labeled),
        "participants": rows,
        "means": {k: float(np.mean([r[k] for r in rows])) for k in keys},
    }
    out = json.dumps(report, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(out + "\n")
        print(f"wrote {args.out}")
    else:
        print(out)
    # terse human-readable table
    print(f"{'participant':<12}{'net':>8}{'ind*net':>9}{'avg*net':>9}{'r_net':>8}{'r_ind':>8}")
    for r in rows:
        print(
            f"{r['participant']:<12}{r['acc_network']:>8.3f}{r['acc_individual_fused']:>9.3f}"
            f"{r['acc_average_fused']:>9.3f}{r['r_network']:>8.3f}{r['r_individual_fused']:>8.3f}"
        )
    return 0


# ------------------------------------------------------------------- serve

def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    default_config = _load_config(args.config) if args.config else None
    app = create_app(args.data_dir, default_config, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ----------------------------------------------------------- cohort-config

def cmd_cohort_config(args) -> int:
    settings = CohortSettings(
        n_participants=args.participants,
        trials_per_chain=args.trials_per_chain,
        seed=args.seed,
    )
    doc = build_run_config(settings)
    out = json.dumps(doc, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out + "\n")
        print(f"wrote {args.out}")
    else:
        print(out)
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorchain",
        description="Choice-chain prior elicitation: simulate, verify, recover, evaluate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run simulated elicitation sessions from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (default: config out_dir or ./out)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle-check", help="exact stationary/recovery verification (discrete)")
    p.add_argument("--config", default=None, help="run config; defaults to the built-in 2x2")
    p.add_argument("--tol-joint", type=float, default=1e-10)
    p.add_argument("--tol-prior", type=float, default=1e-10)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("recover", help="recover a prior from trial logs")
    p.add_argument("--log", required=True, help="a chain log file or a directory of them")
    p.add_argument("--burn-in-fraction", type=float, default=0.1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("eval", help="evaluate predictors against recovered priors")
    p.add_argument("--config", required=True)
    p.add_argument("--priors-dir", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--config", default=None, help="default session config file")
    p.add_argument("--data-dir", default=os.environ.get("PRIORCHAIN_DATA_DIR", "sessions"))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument(
        "--port", type=int, default=int(os.environ.get("PRIORCHAIN_PORT", "8000"))
    )
    p.add_argument("--ui-dir", default=None, help="directory with the built browser client")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("cohort-config", help="emit the synthetic-cohort run config")
    p.add_argument("--participants", type=int, default=20)
    p.add_argument("--trials-per-chain", type=int, default=2000)
    p.add_argument("--seed", type=int, default=CohortSettings.seed)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cohort_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (MalformedLogError, EmptyError, NotDiscreteError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except PriorChainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
