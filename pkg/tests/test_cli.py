"""Experiment harness: configs, fingerprints, and the five subcommands."""

import json
import os

import numpy as np
import pytest

from lwpll import load_partial_csv
from lwpll.cli import ConfigError, ExperimentConfig, main, parse_config_text

BASE_CONFIG = """
# toy experiment
gaussian.classes = 3
gaussian.dim = 2
gaussian.n = 200
gaussian.test_n = 80
gaussian.separation = 4.0
generation.q = 0.3
trainer.epochs = 2
trainer.learning_rate = 0.05
seeds = 0,1
"""


def write_config(tmp_path, text=BASE_CONFIG, **extra):
    lines = [text]
    for key, value in extra.items():
        if "." not in key:
            key = key.replace("_", ".", 1)
        lines.append(f"{key} = {value}")
    path = tmp_path / "exp.cfg"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


# config parsing


def test_parse_config_text():
    parsed = parse_config_text("a.b = 1  # trailing comment\n\n# full comment\nc = hi\n")
    assert parsed == {"a.b": "1", "c": "hi"}


def test_parse_config_rejects_duplicates_and_garbage():
    with pytest.raises(ConfigError):
        parse_config_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError):
        parse_config_text("just some words\n")


def test_config_rejects_unknown_keys(tmp_path):
    path = write_config(tmp_path, BASE_CONFIG + "trainer.warmup = 5\n")
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_file(path)
    assert "trainer.warmup" in str(info.value)


def test_config_type_and_choice_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(write_config(tmp_path, BASE_CONFIG, **{"trainer.epochs": "soon"}))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(write_config(tmp_path, BASE_CONFIG, **{"loss.psi": "hinge"}))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(write_config(tmp_path, BASE_CONFIG, **{"model.arch": "rnn"}))


def test_config_seed_list_and_override(tmp_path):
    cfg = ExperimentConfig.from_file(write_config(tmp_path))
    assert cfg.values["seeds"] == (0, 1)
    solo = cfg.override(seeds=(7,))
    assert solo.values["seeds"] == (7,)
    assert cfg.values["seeds"] == (0, 1)


def test_fingerprint_ignores_output_dir_only(tmp_path):
    a = ExperimentConfig.from_file(write_config(tmp_path, BASE_CONFIG, **{"output.dir": "out_a"}))
    b = ExperimentConfig.from_file(write_config(tmp_path, BASE_CONFIG, **{"output.dir": "out_b"}))
    assert a.fingerprint() == b.fingerprint()
    c = ExperimentConfig.from_file(write_config(tmp_path, BASE_CONFIG, **{"loss.beta": "2.0"}))
    assert c.fingerprint() != a.fingerprint()
    d = ExperimentConfig.from_file(write_config(tmp_path, BASE_CONFIG.replace("seeds = 0,1", "seeds = 0,2")))
    assert d.fingerprint() != a.fingerprint()
    assert len(a.fingerprint()) == 12


# generate


def test_generate_writes_corpus_and_manifest(tmp_path, capsys):
    cfg_path = write_config(tmp_path, BASE_CONFIG, **{"output.dir": tmp_path / "out"})
    assert main(["generate", "--config", cfg_path]) == 0
    fingerprint = None
    for line in capsys.readouterr().out.splitlines():
        if line.startswith("generate "):
            fingerprint = line.split()[1].rstrip(":")
    run_dir = tmp_path / "out" / fingerprint
    corpus = load_partial_csv(str(run_dir / "corpus.csv"))
    assert corpus.features.shape == (200, 2)
    assert corpus.partial_masks[np.arange(200), corpus.true_labels].all()
    test = load_partial_csv(str(run_dir / "test.csv"))
    assert test.features.shape == (80, 2)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["fingerprint"] == fingerprint
    hist = manifest["set_size_histogram"]
    assert sum(hist.values()) == 200
    mean_size = corpus.partial_masks.sum(axis=1).mean()
    # mean candidate count is 1 + (K-1) q = 1.6
    assert abs(mean_size - 1.6) < 0.15


def test_generate_zero_contamination_is_singleton(tmp_path, capsys):
    cfg_path = write_config(
        tmp_path, BASE_CONFIG.replace("generation.q = 0.3", "generation.q = 0.0"),
        **{"output.dir": tmp_path / "out"},
    )
    assert main(["generate", "--config", cfg_path]) == 0
    out = capsys.readouterr().out
    fingerprint = out.split()[1].rstrip(":")
    corpus = load_partial_csv(str(tmp_path / "out" / fingerprint / "corpus.csv"))
    assert (corpus.partial_masks.sum(axis=1) == 1).all()


def test_generate_requires_generative_source(tmp_path):
    cfg_path = write_config(
        tmp_path,
        "dataset.kind = csv\ndataset.csv = somewhere.csv\ngeneration.kind = none\n",
    )
    assert main(["generate", "--config", cfg_path]) == 2


# train


def test_train_writes_metrics_and_checkpoint(tmp_path, capsys):
    cfg_path = write_config(
        tmp_path,
        BASE_CONFIG.replace("seeds = 0,1", "seeds = 3").replace("trainer.epochs = 2", "trainer.epochs = 1"),
        **{"output.dir": tmp_path / "out"},
    )
    assert main(["train", "--config", cfg_path]) == 0
    out = capsys.readouterr().out
    fingerprint = out.split()[1]
    run_dir = tmp_path / "out" / fingerprint
    metrics = (run_dir / "metrics_seed3.csv").read_text().splitlines()
    assert metrics[0] == f"# fingerprint={fingerprint}"
    assert metrics[1] == "epoch,lr,risk,train_accuracy,val_accuracy"
    assert len([l for l in metrics if not l.startswith("#")]) == 2  # header + 1 epoch
    assert metrics[-1].startswith("# test_accuracy=")
    assert (run_dir / "checkpoint_seed3.bin").exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    run = manifest["runs"][0]
    assert run["seed"] == 3
    assert "wall_clock_seconds" in run
    assert len(run["first_batch_indices"]) > 0


def test_train_is_reproducible(tmp_path):
    cfg_path = write_config(tmp_path, BASE_CONFIG, **{"output.dir": tmp_path / "a"})
    assert main(["train", "--config", cfg_path, "--quiet"]) == 0
    assert main(["train", "--config", cfg_path, "--quiet", "--out", str(tmp_path / "b")]) == 0
    for sub_a in (tmp_path / "a").iterdir():
        sub_b = tmp_path / "b" / sub_a.name
        for name in ("metrics_seed0.csv", "metrics_seed1.csv"):
            assert (sub_a / name).read_bytes() == (sub_b / name).read_bytes()


def test_train_seed_flag_overrides(tmp_path, capsys):
    cfg_path = write_config(tmp_path, BASE_CONFIG, **{"output.dir": tmp_path / "out"})
    assert main(["train", "--config", cfg_path, "--seed", "9"]) == 0
    out = capsys.readouterr().out
    fingerprint = out.split()[1]
    run_dir = tmp_path / "out" / fingerprint
    assert (run_dir / "metrics_seed9.csv").exists()
    assert not (run_dir / "metrics_seed0.csv").exists()


# sweep


def test_sweep_pairs_seeds_across_variants(tmp_path):
    cfg_path = write_config(tmp_path, BASE_CONFIG, **{"output.dir": tmp_path / "out"})
    assert main(["sweep", "--config", cfg_path, "--quiet", "--beta", "0,1"]) == 0
    run_dir = next((tmp_path / "out").iterdir())
    summary = (run_dir / "summary.csv").read_text().splitlines()
    assert summary[1] == "variant,alpha,beta,mean_test_accuracy,std_test_accuracy,seeds"
    rows = [line.split(",") for line in summary[2:]]
    assert [r[0] for r in rows] == ["beta0", "beta1"]
    assert all(r[5] == "2" for r in rows)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    by_seed = {}
    for variant in manifest["variants"]:
        for run in variant["runs"]:
            by_seed.setdefault(run["seed"], []).append(run["first_batch_indices"])
    assert sorted(by_seed) == [0, 1]
    for index_lists in by_seed.values():
        assert len(index_lists) == 2
        for other in index_lists[1:]:
            assert other == index_lists[0]


def test_sweep_ablation_variants(tmp_path):
    cfg_path = write_config(
        tmp_path,
        BASE_CONFIG.replace("seeds = 0,1", "seeds = 0"),
        **{"output.dir": tmp_path / "out"},
    )
    assert main(["sweep", "--config", cfg_path, "--quiet", "--ablation"]) == 0
    run_dir = next((tmp_path / "out").iterdir())
    summary = (run_dir / "summary.csv").read_text().splitlines()
    names = [line.split(",")[0] for line in summary[2:]]
    assert names == ["alpha1_beta0", "alpha0_beta1", "alpha1_beta1"]


def test_sweep_parallel_matches_serial(tmp_path):
    cfg_path = write_config(tmp_path, BASE_CONFIG, **{"output.dir": tmp_path / "serial"})
    assert main(["sweep", "--config", cfg_path, "--quiet", "--beta", "0,1"]) == 0
    env_before = os.environ.get("LW_THREADS")
    os.environ["LW_THREADS"] = "2"
    try:
        assert main(["sweep", "--config", cfg_path, "--quiet", "--beta", "0,1",
                     "--out", str(tmp_path / "par")]) == 0
    finally:
        if env_before is None:
            del os.environ["LW_THREADS"]
        else:
            os.environ["LW_THREADS"] = env_before
    serial_dir = next((tmp_path / "serial").iterdir())
    par_dir = next((tmp_path / "par").iterdir())
    assert (serial_dir / "summary.csv").read_bytes() == (par_dir / "summary.csv").read_bytes()


# verify


def test_verify_passes_and_reports(capsys):
    assert main(["verify", "--trials", "60", "--k-list", "2,3,4"]) == 0
    out = capsys.readouterr().out
    tail = json.loads(out.splitlines()[-1])
    assert tail["pass"] is True
    assert tail["max_discrepancy"] < 1e-10


def test_verify_zero_trials_warns(capsys):
    assert main(["verify", "--trials", "0"]) == 0
    captured = capsys.readouterr()
    text = (captured.out + captured.err).lower()
    assert "vacuous" in text


def test_verify_injected_error_fails(capsys):
    assert main(["verify", "--trials", "60", "--k-list", "2,3,4", "--inject-beta-error"]) == 1
    tail = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert tail["pass"] is False
    assert tail["max_discrepancy"] > 1e-10


# eval


def test_eval_round_trip(tmp_path, capsys):
    separable = BASE_CONFIG.replace("seeds = 0,1", "seeds = 0").replace(
        "trainer.epochs = 2", "trainer.epochs = 20"
    )
    cfg_path = write_config(
        tmp_path, separable,
        **{"output.dir": tmp_path / "out", "trainer.batch_size": 32},
    )
    assert main(["generate", "--config", cfg_path, "--quiet"]) == 0
    assert main(["train", "--config", cfg_path, "--quiet"]) == 0
    gen_dir = train_dir = None
    for sub in (tmp_path / "out").iterdir():
        if (sub / "corpus.csv").exists():
            gen_dir = sub
        if (sub / "checkpoint_seed0.bin").exists():
            train_dir = sub
    confusion = tmp_path / "confusion.csv"
    assert main([
        "eval",
        "--checkpoint", str(train_dir / "checkpoint_seed0.bin"),
        "--csv", str(gen_dir / "test.csv"),
        "--confusion", str(confusion),
    ]) == 0
    out = capsys.readouterr().out
    acc = float(out.split("accuracy=")[1].split()[0])
    assert acc >= 0.9
    lines = confusion.read_text().splitlines()
    assert lines[0] == "true_label,pred_0,pred_1,pred_2"
    counts = np.array([[int(v) for v in line.split(",")[1:]] for line in lines[1:]])
    test = load_partial_csv(str(gen_dir / "test.csv"))
    per_class = np.bincount(test.true_labels, minlength=3)
    assert np.array_equal(counts.sum(axis=1), per_class)
    assert counts.sum() == 80


def test_eval_architecture_mismatch(tmp_path):
    cfg_path = write_config(
        tmp_path,
        BASE_CONFIG.replace("seeds = 0,1", "seeds = 0").replace("trainer.epochs = 2", "trainer.epochs = 1"),
        **{"output.dir": tmp_path / "out"},
    )
    assert main(["train", "--config", cfg_path, "--quiet"]) == 0
    checkpoint = next((tmp_path / "out").iterdir()) / "checkpoint_seed0.bin"
    wide = tmp_path / "wide.csv"
    wide.write_text("f0,f1,f2,candidates,true_label\n0.1,0.2,0.3,0,0\n")
    assert main(["eval", "--checkpoint", str(checkpoint), "--csv", str(wide)]) == 2


def test_unknown_config_path_is_reported(tmp_path):
    assert main(["train", "--config", str(tmp_path / "missing.cfg")]) == 2
