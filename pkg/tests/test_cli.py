import os

import pytest

from ltrlab.cli import main
from ltrlab.io import load_run, write_features, write_qrels, write_run, write_teacher

from conftest import make_separable_fixture, teacher_records


@pytest.fixture
def workspace(tmp_path):
    """Small separable dataset written to disk in all CLI input formats."""
    store, qrels, groups, run = make_separable_fixture(dim=4, n_queries=12, seed=9)
    paths = {
        "run": str(tmp_path / "first_stage.run"),
        "qrels": str(tmp_path / "judgments.qrels"),
        "features": str(tmp_path / "features.jsonl"),
        "teacher": str(tmp_path / "teacher.jsonl"),
        "root": tmp_path,
    }
    write_run(run, paths["run"])
    write_qrels(qrels, paths["qrels"])
    write_features(store, paths["features"])
    write_teacher(teacher_records(qrels, groups), paths["teacher"])
    return paths


def out_dir(workspace, name):
    return str(workspace["root"] / name)


def test_full_pipeline(workspace, capsys):
    # mine -> train -> rerank -> eval -> summary, all via the CLI
    mine_out = out_dir(workspace, "mine")
    assert main(["mine", "--run", workspace["run"], "--qrels", workspace["qrels"],
                 "--teacher", workspace["teacher"], "--out", mine_out]) == 0
    groups_path = os.path.join(mine_out, "groups.jsonl")
    assert os.path.exists(groups_path)
    assert os.path.exists(os.path.join(mine_out, "mining_report.txt"))

    train_out = out_dir(workspace, "train")
    assert main(["train", "--groups", groups_path, "--features", workspace["features"],
                 "--out", train_out, "--set", "base_lr=0.03"]) == 0
    ckpt = os.path.join(train_out, "checkpoint.txt")
    assert os.path.exists(ckpt)
    report = open(os.path.join(train_out, "training_report.txt")).read()
    assert report.startswith("# ltrlab ")
    assert "epoch 1:" in report

    rerank_out = out_dir(workspace, "rerank")
    assert main(["rerank", "--run", workspace["run"], "--features", workspace["features"],
                 "--checkpoint", ckpt, "--out", rerank_out]) == 0
    reranked = load_run(os.path.join(rerank_out, "reranked.run"))
    reranked.validate()
    assert reranked.query_ids() == load_run(workspace["run"]).query_ids()

    eval_out = out_dir(workspace, "eval")
    assert main(["eval", "--run", os.path.join(rerank_out, "reranked.run"),
                 "--qrels", workspace["qrels"], "--baseline", workspace["run"],
                 "--out", eval_out, "--set", "metric_cutoffs=1,3"]) == 0
    stdout = capsys.readouterr().out
    assert "recall" in stdout and "ndcg" in stdout
    assert os.path.exists(os.path.join(eval_out, "eval_metrics.txt"))

    assert main(["summary", "--groups", groups_path]) == 0
    assert "total_records" in capsys.readouterr().out


def test_outputs_byte_reproducible(workspace):
    for name in ("a", "b"):
        mine_out = out_dir(workspace, f"mine_{name}")
        main(["mine", "--run", workspace["run"], "--qrels", workspace["qrels"],
              "--teacher", workspace["teacher"], "--out", mine_out, "--seed", "3"])
        main(["train", "--groups", os.path.join(mine_out, "groups.jsonl"),
              "--features", workspace["features"],
              "--out", out_dir(workspace, f"train_{name}"),
              "--seed", "3", "--set", "base_lr=0.03"])
    ga = open(out_dir(workspace, "mine_a") + "/groups.jsonl", "rb").read()
    gb = open(out_dir(workspace, "mine_b") + "/groups.jsonl", "rb").read()
    assert ga == gb
    ca = open(out_dir(workspace, "train_a") + "/checkpoint.txt", "rb").read()
    cb = open(out_dir(workspace, "train_b") + "/checkpoint.txt", "rb").read()
    assert ca == cb


def test_eval_against_self_is_all_zero_deltas(workspace, capsys, tmp_path):
    eval_out = out_dir(workspace, "eval_self")
    assert main(["eval", "--run", workspace["run"], "--qrels", workspace["qrels"],
                 "--baseline", workspace["run"], "--out", eval_out,
                 "--set", "metric_cutoffs=1,3"]) == 0
    capsys.readouterr()
    keyed = open(os.path.join(eval_out, "eval_metrics.txt")).read()
    assert "recall_delta_pct@1 = 0.00" in keyed
    assert "ndcg_delta_pct@3 = 0.00" in keyed


def test_train_ablation_flags(workspace):
    mine_out = out_dir(workspace, "mine_abl")
    main(["mine", "--run", workspace["run"], "--qrels", workspace["qrels"],
          "--teacher", workspace["teacher"], "--out", mine_out])
    train_out = out_dir(workspace, "train_abl")
    assert main(["train", "--groups", os.path.join(mine_out, "groups.jsonl"),
                 "--features", workspace["features"], "--out", train_out,
                 "--no-teacher", "--no-point"]) == 0
    report = open(os.path.join(train_out, "training_report.txt")).read()
    assert "mean_teacher = 0.000000" in report
    assert "mean_point = 0.000000" in report


def test_filter_command(workspace):
    filt_out = out_dir(workspace, "filter")
    assert main(["filter", "--run", workspace["run"], "--qrels", workspace["qrels"],
                 "--teacher", workspace["teacher"], "--out", filt_out]) == 0
    kept = open(os.path.join(filt_out, "kept_queries.txt")).read().split()
    assert len(kept) == 12  # clean fixture: nothing filtered
    assert os.path.exists(os.path.join(filt_out, "filter_report.txt"))


def test_diagnose_command(workspace, capsys):
    scores_path = str(workspace["root"] / "scores.txt")
    run = load_run(workspace["run"])
    with open(scores_path, "w") as f:
        for e in run.entries:
            f.write(f"{e.query_id} {e.video_id} {e.score}\n")
    diag_out = out_dir(workspace, "diag")
    assert main(["diagnose", "--scores", scores_path, "--qrels", workspace["qrels"],
                 "--out", diag_out]) == 0
    stdout = capsys.readouterr().out
    assert "auc = " in stdout
    assert os.path.exists(os.path.join(diag_out, "ecdf_relevant.txt"))
    assert os.path.exists(os.path.join(diag_out, "ecdf_nonrelevant.txt"))
    report = open(os.path.join(diag_out, "diagnostics_report.txt")).read()
    assert "r2_additive" in report


def test_gradcheck_pass_and_negative_control(capsys, monkeypatch):
    assert main(["gradcheck", "--trials", "5", "--dim", "3"]) == 0
    assert capsys.readouterr().out.startswith("PASS")
    monkeypatch.setenv("LTRLAB_GRADCHECK_CORRUPT", "1")
    assert main(["gradcheck", "--trials", "5", "--dim", "3"]) == 1
    assert capsys.readouterr().out.startswith("FAIL")


def test_gradcheck_bad_trials(capsys):
    assert main(["gradcheck", "--trials", "0"]) == 1
    assert "trials" in capsys.readouterr().err


def test_missing_input_exit_2(workspace, capsys):
    code = main(["rerank", "--run", workspace["run"], "--features", workspace["features"],
                 "--checkpoint", "/nonexistent/ckpt.txt",
                 "--out", out_dir(workspace, "x")])
    assert code == 2
    assert "/nonexistent/ckpt.txt" in capsys.readouterr().err


def test_malformed_run_exit_1(workspace, capsys, tmp_path):
    bad = tmp_path / "bad.run"
    bad.write_text("q1 Q0 v1 1 notanumber tag\n")
    code = main(["eval", "--run", str(bad), "--qrels", workspace["qrels"]])
    assert code == 1
    assert "bad.run:1" in capsys.readouterr().err


def test_unknown_config_key_exit_1(workspace, capsys):
    code = main(["eval", "--run", workspace["run"], "--qrels", workspace["qrels"],
                 "--set", "nonsense=1"])
    assert code == 1
    assert "nonsense" in capsys.readouterr().err


def test_seed_flag_changes_init(workspace):
    mine_out = out_dir(workspace, "mine_seed")
    main(["mine", "--run", workspace["run"], "--qrels", workspace["qrels"],
          "--teacher", workspace["teacher"], "--out", mine_out])
    ckpts = []
    for seed in ("1", "2"):
        train_out = out_dir(workspace, f"train_seed{seed}")
        main(["train", "--groups", os.path.join(mine_out, "groups.jsonl"),
              "--features", workspace["features"], "--out", train_out, "--seed", seed])
        ckpts.append(open(os.path.join(train_out, "checkpoint.txt"), "rb").read())
    assert ckpts[0] != ckpts[1]
