import json

import pytest

from macda.errors import ConfigError, DataError
from macda.fixtures import SMALL_PROTEIN, dataset_path
from macda.harness import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    OUTPUT_FILES,
    RunConfig,
    execute,
    load_dataset,
    run,
    select_pairs,
)
from macda.marl import TrainConfig

HEADER = "drug_id,smiles,protein_id,sequence,pkd\n"


def write_csv(tmp_path, body, name="data.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body)
    return path


def small_config(tmp_path, **overrides):
    doc = {
        "dataset": dataset_path(),
        "drugs": ["phenol", "isobutanol"],
        "protein": "SYN30",
        "output": str(tmp_path / "out"),
        "train": {"episodes": 40, "seed": 3, "hidden": [16, 16]},
    }
    doc.update(overrides)
    return RunConfig.from_dict(doc)


class TestLoadDataset:
    def test_two_rows(self, tmp_path):
        path = write_csv(tmp_path, f"a,CCO,P1,{SMALL_PROTEIN},7.1\nb,c1ccccc1,P1,{SMALL_PROTEIN},\n")
        rows = load_dataset(path)
        assert [r.drug_id for r in rows] == ["a", "b"]
        assert rows[0].pkd == 7.1 and rows[1].pkd is None and rows[1].line == 3

    def test_stereo_row_names_line_and_offset(self, tmp_path):
        path = write_csv(tmp_path, f"a,CCO,P1,{SMALL_PROTEIN},\nb,C[C@H](O)N,P1,{SMALL_PROTEIN},\n")
        with pytest.raises(DataError) as err:
            load_dataset(path)
        assert "line 3" in str(err.value) and "byte offset 3" in str(err.value)

    def test_all_problems_reported(self, tmp_path):
        path = write_csv(tmp_path, f"a,C/C,P1,{SMALL_PROTEIN},\nb,CC,P1,MKZ,\nc,CC,P1,MK,high\nd,CC\n")
        msg = str(pytest.raises(DataError, load_dataset, path).value)
        for line in (2, 3, 4, 5):
            assert f"line {line}" in msg

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError, match="no rows"):
            load_dataset(path)

    def test_header_only(self, tmp_path):
        with pytest.raises(DataError, match="no rows"):
            load_dataset(write_csv(tmp_path, ""))

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("id,smiles\n1,C\n")
        with pytest.raises(DataError, match="header"):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope.csv")

    def test_bundled_fixture(self):
        rows = load_dataset(dataset_path())
        assert len(rows) == 8 and {r.protein_id for r in rows} == {"SYN30"}


class TestSelectPairs:
    def test_protein_pairing(self):
        pairs = select_pairs(load_dataset(dataset_path()), ["phenol", "acetanilide"], "SYN30")
        assert [p[2] for p in pairs] == ["phenol", "acetanilide"]

    def test_unknown_ids(self):
        rows = load_dataset(dataset_path())
        with pytest.raises(DataError):
            select_pairs(rows, ["aspirin"])
        with pytest.raises(DataError):
            select_pairs(rows, None, "ABL1")


class TestConfig:
    def test_defaults_reproduce_training_table(self):
        cfg = RunConfig.from_dict({"dataset": "x.csv"})
        assert cfg.train == TrainConfig() and cfg.top_k == 10 and cfg.method == "macda"

    def test_top_level_weights_and_top_k(self):
        cfg = RunConfig.from_dict({"dataset": "x.csv", "top_k": 3, "weights": {"alpha_r": 2.0}})
        assert cfg.top_k == 3 and cfg.weights.alpha_r == 2.0

    @pytest.mark.parametrize("doc", [
        {},
        {"dataset": "x.csv", "method": "greedy"},
        {"dataset": "x.csv", "colour": 1},
        {"dataset": "x.csv", "train": {"gamma": 2.0}},
        {"dataset": "x.csv", "train": {"momentum": 0.5}},
    ])
    def test_invalid(self, doc):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(doc)

    def test_paths_resolve_against_config_dir(self, tmp_path):
        (tmp_path / "cfg.json").write_text(json.dumps({"dataset": "data.csv"}))
        cfg = RunConfig.load(tmp_path / "cfg.json")
        assert cfg.resolve(cfg.dataset) == tmp_path / "data.csv"
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_bad_json(self, tmp_path):
        (tmp_path / "cfg.json").write_text("{")
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "cfg.json")

    def test_overrides(self):
        cfg = RunConfig.from_dict({"dataset": "x.csv"}).with_overrides("jointlist", 5, 12, 4, "o")
        assert (cfg.method, cfg.train.seed, cfg.train.episodes, cfg.top_k, cfg.output) == ("jointlist", 5, 12, 4, "o")
        with pytest.raises(ConfigError):
            cfg.with_overrides(episodes=-1)


class TestRun:
    def test_outputs_written(self, tmp_path):
        result = execute(small_config(tmp_path))
        for name in OUTPUT_FILES:
            assert (tmp_path / "out" / name).is_file()
        lines = (tmp_path / "out" / "records.jsonl").read_text().splitlines()
        assert len(lines) == len(result.records) == 20
        doc = json.loads((tmp_path / "out" / "report.json").read_text())
        assert doc["pairs"] == 2 and doc["report"]["n"] == 20
        assert not list((tmp_path / "out").glob(".*"))

    def test_same_seed_byte_identical(self, tmp_path):
        a = execute(small_config(tmp_path / "a"))
        b = execute(small_config(tmp_path / "b", output=str(tmp_path / "b" / "out")))
        for name in OUTPUT_FILES:
            text_a = a.files[name].read_bytes()
            text_b = b.files[name].read_bytes()
            if name == "report.json":
                text_a, text_b = (json.loads(t) for t in (text_a, text_b))
                text_a["config"].pop("output")
                text_b["config"].pop("output")
            assert text_a == text_b, name

    def test_zero_episodes(self, tmp_path):
        cfg = small_config(tmp_path, train={"episodes": 0})
        assert run(cfg, echo=None) == EXIT_OK
        assert (tmp_path / "out" / "records.jsonl").read_text() == ""

    def test_jointlist_all_alanine_is_data_error(self, tmp_path):
        data = write_csv(tmp_path, "d,CCO,ALA,AAAAAA,\n")
        cfg = RunConfig.from_dict({"dataset": str(data), "method": "jointlist",
                                   "output": str(tmp_path / "out")})
        assert run(cfg, echo=None) == EXIT_DATA

    def test_missing_dataset_is_config_error(self, tmp_path):
        cfg = RunConfig.from_dict({"dataset": str(tmp_path / "none.csv")})
        assert run(cfg, echo=None) == EXIT_CONFIG

    def test_bad_row_is_data_error(self, tmp_path):
        data = write_csv(tmp_path, "d,C/C=C/C,P,MKTW,\n")
        assert run(RunConfig.from_dict({"dataset": str(data)}), echo=None) == EXIT_DATA

    def test_echo_prints_table(self, tmp_path):
        seen = []
        assert run(small_config(tmp_path, method="jointlist"), echo=seen.append) == EXIT_OK
        assert seen[0].startswith("Method")
