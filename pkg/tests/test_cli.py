import json

import pytest

from welfarerec.cli import main
from welfarerec.experiment import PRESETS, ExperimentConfig, preset_config, run_experiment
from welfarerec.metrics import CSV_COLUMNS, read_report_csv
from welfarerec.model import load_checkpoint
from welfarerec.sim import load_world, read_events_csv

TINY_ENV = {"name": "tiny", "nb_users": 30, "nb_prods": 12, "nb_sessions": 4,
            "nb_items_session": 3, "dimension": 3}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"env": TINY_ENV, "train": {"epochs": 3, "batch": 32},
                                "ks": [1, 2], "n_seeds": 2}))
    return path


class TestPresets:
    @pytest.mark.parametrize("name,shape", [
        ("medium1", (3, 10, 1000, 100, 10)),
        ("medium2", (15, 2, 1000, 100, 10)),
        ("hard", (3, 10, 1000, 1000, 10)),
    ])
    def test_expand(self, name, shape):
        cfg = preset_config(name)
        assert (cfg.nb_sessions, cfg.nb_items_session, cfg.nb_users, cfg.nb_prods,
                cfg.dimension) == shape
        assert cfg.latent_variance == 3.0
        assert (cfg.price_noise_lo, cfg.price_noise_hi) == (0.0, 5.0)

    def test_unknown(self):
        with pytest.raises(ValueError):
            preset_config("easy")
        assert set(PRESETS) == {"medium1", "medium2", "hard"}

    def test_config_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"env": "medium1", "n_seed": 3})


def test_simulate_train_evaluate(tmp_path):
    cfg = tmp_path / "env.json"
    cfg.write_text(json.dumps({k: v for k, v in TINY_ENV.items() if k != "name"}))
    sim_dir, model_dir, eval_dir = tmp_path / "sim", tmp_path / "model", tmp_path / "eval"
    assert main(["simulate", "--config", str(cfg), "--seed", "4", "--out", str(sim_dir)]) == 0
    world = load_world(sim_dir / "world.json")
    assert world.config.seed == 4 and world.nb_users == 30
    assert len(read_events_csv(sim_dir / "events.csv")) == 120

    train_cfg = tmp_path / "train.json"
    train_cfg.write_text(json.dumps({"train": {"epochs": 2}}))
    assert main(["train", "--world", str(sim_dir / "world.json"), "--events", str(sim_dir / "events.csv"),
                 "--family", "mf-pclick", "--config", str(train_cfg), "--out", str(model_dir)]) == 0
    assert load_checkpoint(model_dir / "checkpoint.json").d == 3
    assert (model_dir / "loss_trace.csv").read_text().splitlines()[0] == "epoch,mean_nll,reg_term"

    assert main(["evaluate", "--world", str(sim_dir / "world.json"), "--checkpoint",
                 str(model_dir / "checkpoint.json"), "--k", "1,3", "--out", str(eval_dir),
                 "--dump-slates"]) == 0
    rows = read_report_csv(eval_dir / "metrics.csv")
    # pclick: sales and revenue only, at two k values
    assert [(r["objective"], r["k"]) for r in rows] == [("sales", "1"), ("sales", "3"),
                                                        ("revenue", "1"), ("revenue", "3")]
    assert (eval_dir / "slates.csv").exists()


def test_simulate_preset(tmp_path):
    assert main(["simulate", "--preset", "medium2", "--seed", "1", "--out", str(tmp_path)]) == 0
    world = load_world(tmp_path / "world.json")
    assert world.config.nb_sessions == 15 and world.config.nb_items_session == 2


def test_experiment_outputs_and_determinism(tmp_path, tiny_config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", str(tiny_config), "--seed", "3", "--out", str(a)]) == 0
    assert main(["experiment", "--config", str(tiny_config), "--seed", "3", "--out", str(b)]) == 0
    for name in ("metrics.csv", "metrics_per_seed.csv", "report.md"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    traces = sorted(p.name for p in (a / "traces").iterdir())
    assert traces == sorted(f"tiny_seed{s}_{m}.csv" for s in (3, 4) for m in ("rum-mf", "mf-sm", "mf-pclick"))

    rows = read_report_csv(a / "metrics.csv")
    assert list(rows[0]) == ["env"] + CSV_COLUMNS
    pairs = {(r["method"], r["objective"]) for r in rows}
    assert ("mf-pclick", "welfare") not in pairs and ("mf-pclick", "revenue") in pairs
    for r in rows:
        assert abs(float(r["welfare"]) - float(r["utility"]) - float(r["revenue"])) <= 1e-9
    seeds = {r["seed"] for r in read_report_csv(a / "metrics_per_seed.csv")}
    assert seeds == {"3", "4"}

    report = (a / "report.md").read_text()
    assert "| Algo | Objective | Welfare@k" in report
    assert "tiny seed3" in report and "Welfare@2" in report


def test_unsupported_pair_logged(caplog):
    cfg = ExperimentConfig.from_dict({"env": TINY_ENV, "train": {"epochs": 1}, "n_seeds": 1,
                                      "methods": ["mf-pclick"], "objectives": ["welfare", "sales"]})
    with caplog.at_level("WARNING"):
        results = run_experiment(cfg)
    assert "mf-pclick/welfare" in caplog.text
    assert [(r.method, r.objective) for r in results["tiny"]] == [("mf-pclick", "sales")]


def test_bad_preset_exit_code(tmp_path):
    assert main(["experiment", "--preset", "nope", "--out", str(tmp_path)]) == 2


def test_bad_k():
    with pytest.raises(SystemExit):
        main(["experiment", "--k", "0,x"])
