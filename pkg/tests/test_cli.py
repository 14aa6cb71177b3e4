import json
from pathlib import Path

import pytest

from priorchain.cli import main
from priorchain.cohort import CohortSettings, build_run_config


@pytest.fixture(scope="module")
def tiny_cohort_config(tmp_path_factory):
    root = tmp_path_factory.mktemp("cohort")
    settings = CohortSettings(n_participants=3, trials_per_chain=80, seed=4242)
    config = build_run_config(settings)
    path = root / "config.json"
    path.write_text(json.dumps(config))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def test_simulate_writes_logs_and_priors(tiny_cohort_config, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(tiny_cohort_config), "--out", str(out)]) == 0
    priors = sorted((out / "priors").glob("*.prior.json"))
    assert len(priors) == 3
    logs = sorted((out / "logs" / "p00").glob("*.jsonl"))
    assert len(logs) == 7
    doc = read_json(priors[0])
    assert sum(doc["probs"]) == pytest.approx(1.0, abs=1e-9)
    assert doc["labels"] is not None


def test_simulate_deterministic(tiny_cohort_config, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(tiny_cohort_config), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(tiny_cohort_config), "--out", str(out2)]) == 0
    for rel in ["priors/p01.prior.json", "logs/p02/c3.jsonl", "manifest.json"]:
        assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()


def test_recover_matches_simulated_prior(tiny_cohort_config, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(tiny_cohort_config), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["recover", "--log", str(out / "logs" / "p00")]) == 0
    recovered = json.loads(capsys.readouterr().out)
    emitted = read_json(out / "priors" / "p00.prior.json")
    assert recovered["probs"] == emitted["probs"]
    assert recovered["per_chain"] == emitted["per_chain"]


def test_recover_truncated_log_is_data_error(tiny_cohort_config, tmp_path):
    out = tmp_path / "run"
    main(["simulate", "--config", str(tiny_cohort_config), "--out", str(out)])
    log = out / "logs" / "p00" / "c0.jsonl"
    text = log.read_text().splitlines()
    log.write_text("\n".join(text[:1]) + "\n{bad json\n")
    assert main(["recover", "--log", str(log)]) == 2


def test_recover_missing_log(tmp_path):
    assert main(["recover", "--log", str(tmp_path / "nope.jsonl")]) == 2


def test_oracle_check_default_canonical(capsys):
    assert main(["oracle-check"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["prior_tv_gap"] <= 1e-10
    assert report["reweighted_marginal"] == pytest.approx([0.7, 0.3], abs=1e-10)


def test_oracle_check_tolerance_exit_code():
    assert main(["oracle-check", "--tol-prior", "0"]) == 3


def test_oracle_check_rejects_continuous(tmp_path):
    config = {
        "categories": ["a", "b"],
        "seed": 3,
        "participants": [
            {
                "label": "p",
                "prior": [0.5, 0.5],
                "likelihood": {
                    "kind": "gaussian",
                    "means": [[0.0, 0.0], [1.0, 1.0]],
                    "variances": [[1.0, 1.0], [1.0, 1.0]],
                },
            }
        ],
    }
    path = tmp_path / "cont.json"
    path.write_text(json.dumps(config))
    assert main(["oracle-check", "--config", str(path)]) == 2


def test_simulate_invalid_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"categories": ["a"], "participants": []}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    missing = tmp_path / "missing.json"
    assert main(["simulate", "--config", str(missing), "--out", str(tmp_path / "o")]) == 1


def test_eval_produces_ordered_report(tiny_cohort_config, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(tiny_cohort_config), "--out", str(out)]) == 0
    report_path = tmp_path / "report.json"
    assert main([
        "eval",
        "--config", str(tiny_cohort_config),
        "--priors-dir", str(out / "priors"),
        "--out", str(report_path),
    ]) == 0
    report = read_json(report_path)
    assert report["n_ambiguous"] == 28
    means = report["means"]
    assert means["acc_individual_fused"] > means["acc_network"]
    assert set(report["participants"][0]) >= {
        "acc_network", "acc_individual_fused", "r_network", "r_individual_fused",
    }


def test_eval_empty_priors_dir(tiny_cohort_config, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main([
        "eval", "--config", str(tiny_cohort_config), "--priors-dir", str(empty),
    ]) == 2


def test_cohort_config_roundtrip(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert main([
        "cohort-config", "--participants", "2", "--trials-per-chain", "50",
        "--out", str(out),
    ]) == 0
    doc = read_json(out)
    assert len(doc["participants"]) == 2
    assert doc["trials_per_chain"] == 50


def test_serve_bad_config(tmp_path):
    missing = tmp_path / "nope.json"
    assert main(["serve", "--config", str(missing), "--data-dir", str(tmp_path)]) == 1


def test_simulate_parallel_workers_identical_output(tiny_cohort_config, tmp_path):
    seq, par = tmp_path / "seq", tmp_path / "par"
    assert main(["simulate", "--config", str(tiny_cohort_config), "--out", str(seq)]) == 0
    assert main([
        "simulate", "--config", str(tiny_cohort_config), "--out", str(par), "--workers", "3",
    ]) == 0
    for rel in ["priors/p00.prior.json", "priors/p02.prior.json", "logs/p01/c5.jsonl"]:
        assert (seq / rel).read_bytes() == (par / rel).read_bytes()


def test_cli_simulate_reproduces_in_process_elicitation(tmp_path):
    # the CLI and the library derive per-(participant, chain) seeds the same
    # way, so cmd_simulate must emit exactly the library's estimates
    from priorchain.cohort import (
        build_gatekeeper,
        build_participants,
        build_run_config,
        elicit_prior,
    )

    settings = CohortSettings(n_participants=2, trials_per_chain=60, seed=808)
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps(build_run_config(settings)))
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(config_path), "--out", str(out)]) == 0

    gatekeeper = build_gatekeeper(settings)
    for i, participant in enumerate(build_participants(settings)):
        expected = elicit_prior(settings, i, participant, gatekeeper)
        emitted = read_json(out / "priors" / f"{participant.label}.prior.json")
        assert emitted["probs"] == expected.to_dict()["probs"]
        assert emitted["per_chain"] == expected.to_dict()["per_chain"]
