"""Test the command-line interface."""

import json

import pytest

import platont
from platont import _cli
from platont import _common

SMALL_CONFIG = {
    "train": {"batch_size": 16, "epochs": 1},
    "model": {"hidden": [8], "latent_dim": 4},
}


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch):
    monkeypatch.delenv(_cli.SEED_ENV_VAR, raising=False)


@pytest.fixture
def topology(tmp_path):
    path = tmp_path / "tree.json"
    argv = ["gen-topo", "--nodes", "9", "--seed", "3", "--out", str(path)]
    assert _cli.main(argv) == 0
    return path


@pytest.fixture
def dataset(tmp_path, topology):
    path = tmp_path / "data.json"
    argv = ["simulate", "--topo", str(topology), "--horizon", "40", "--out", str(path)]
    assert _cli.main(argv) == 0
    return path


class TestGenTopo:
    def test_tree(self, topology):
        assert platont.load_topology(topology) == platont.generate_random_tree(9, 3)
        manifest = _common.read_json(f"{topology}.manifest.json")
        assert manifest["command"] == "gen-topo"
        assert manifest["seeds"] == [3]
        assert manifest["arguments"]["nodes"] == 9
        assert "numpy" in manifest["versions"]

    def test_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv(_cli.SEED_ENV_VAR, "7")
        path = tmp_path / "tree.json"
        assert _cli.main(["gen-topo", "--nodes", "9", "--out", str(path)]) == 0
        assert platont.load_topology(path) == platont.generate_random_tree(9, 7)
        assert _common.read_json(f"{path}.manifest.json")["seeds"] == [7]

    def test_bad_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv(_cli.SEED_ENV_VAR, "seven")
        path = tmp_path / "tree.json"
        assert _cli.main(["gen-topo", "--nodes", "9", "--out", str(path)]) == 1
        assert not path.exists()

    def test_too_few_nodes(self, tmp_path):
        path = tmp_path / "tree.json"
        assert _cli.main(["gen-topo", "--nodes", "1", "--out", str(path)]) == 1


class TestSimulate:
    def test_dataset(self, dataset):
        loaded = platont.load_dataset(dataset)
        assert loaded.size == 40
        assert loaded.network == platont.generate_random_tree(9, 3)
        assert _common.read_json(f"{dataset}.manifest.json")["command"] == "simulate"

    def test_invalid_topology(self, tmp_path):
        topo = tmp_path / "tree.json"
        topo.write_text(json.dumps({"nodes": 3}))
        argv = ["simulate", "--topo", str(topo), "--out", str(tmp_path / "d.json")]
        assert _cli.main(argv) == 1

    def test_missing_topology(self, tmp_path):
        argv = [
            "simulate",
            "--topo",
            str(tmp_path / "missing.json"),
            "--out",
            str(tmp_path / "d.json"),
        ]
        assert _cli.main(argv) == 1


class TestTrainEvaluate:
    def test_train_then_evaluate(self, tmp_path, dataset):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(SMALL_CONFIG))
        ckpt = tmp_path / "model.ckpt"
        argv = [
            "train",
            "--data",
            str(dataset),
            "--config",
            str(config),
            "--seed",
            "4",
            "--out",
            str(ckpt),
            "--log",
            str(tmp_path / "log.csv"),
        ]
        assert _cli.main(argv) == 0
        model, header = platont.load_checkpoint(ckpt)
        assert model.config.hidden == (8,)
        assert header["extra"]["train"]["seed"] == 4
        topology_hash = platont.load_dataset(dataset).network.topology_hash()
        assert header["extra"]["topology_hash"] == topology_hash
        manifest = _common.read_json(f"{ckpt}.manifest.json")
        assert manifest["seeds"] == [4]
        assert manifest["arguments"]["config_data"]["model"]["latent_dim"] == 4
        assert (tmp_path / "log.csv").read_text().startswith("step,L_align")

        out = tmp_path / "results.json"
        argv = [
            "eval", "--data", str(dataset), "--ckpt", str(ckpt), "--task", "link",
            "--out", str(out),
        ]
        assert _cli.main(argv) == 0
        results = _common.read_json(out)
        assert results["dataset"]["horizon"] == 40
        assert results["results"][0]["pipeline"] == "platont"
        assert "link" in results["results"][0]

    def test_evaluate_baseline(self, tmp_path, dataset):
        out = tmp_path / "results.json"
        argv = [
            "eval", "--data", str(dataset), "--pipeline", "clean", "--task", "od",
            "--out", str(out),
        ]
        assert _cli.main(argv) == 0
        result = _common.read_json(out)["results"][0]
        assert result["od"]["gap_mean"] == 0.0

    def test_model_pipeline_needs_checkpoint(self, tmp_path, dataset):
        out = tmp_path / "results.json"
        assert _cli.main(["eval", "--data", str(dataset), "--out", str(out)]) == 1
        assert not out.exists()


def test_theory(tmp_path):
    out = tmp_path / "theory.json"
    argv = ["theory", "--suite", "proposition1", "--trials", "5", "--out", str(out)]
    assert _cli.main(argv) == 0
    results = _common.read_json(out)
    assert list(results) == ["proposition1"]
    assert len(results["proposition1"]) == 5


class TestMatrixReport:
    @pytest.fixture
    def results(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "node_counts": [7],
            "seeds": [0],
            "noise_levels": [0.1],
            "noise_kinds": ["channel"],
            "pipelines": ["clean", "raw"],
            "tasks": ["link"],
            "horizon": 40,
        }))
        out = tmp_path / "out"
        assert _cli.main(["matrix", "--config", str(config), "--out", str(out)]) == 0
        return out

    def test_outputs(self, results):
        for name in ("results.json", "report.md", "manifest.json", "topology.csv"):
            assert (results / name).is_file()
        assert (results / "report.md").read_text().startswith("# PlatoNT results")
        assert _common.read_json(results / "manifest.json")["command"] == "matrix"

    def test_report_to_file(self, results, tmp_path):
        out = tmp_path / "report.md"
        assert _cli.main(["report", "--results", str(results), "--out", str(out)]) == 0
        assert out.read_text() == (results / "report.md").read_text()

    def test_report_to_stdout(self, results, capsys):
        assert _cli.main(["report", "--results", str(results / "results.json")]) == 0
        assert "## Link diagnosis" in capsys.readouterr().out

    def test_invalid_config(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"pipelines": ["ica"]}))
        argv = ["matrix", "--config", str(config), "--out", str(tmp_path / "out")]
        assert _cli.main(argv) == 1


def test_no_command():
    with pytest.raises(SystemExit):
        _cli.main([])


@pytest.mark.parametrize(
    ("argv", "verbose", "quiet"),
    [
        (["-v", "-v", "report", "--results", "x"], 2, False),
        (["-q", "report", "--results", "x"], 0, True),
        (["report", "--results", "x", "-v"], 1, False),
        (["report", "--results", "x"], 0, False),
    ],
)
def test_logging_options(argv, verbose, quiet):
    args = _cli.build_parser().parse_args(argv)
    assert args.verbose == verbose
    assert args.quiet is quiet
