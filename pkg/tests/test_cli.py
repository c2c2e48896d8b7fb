import json
import subprocess
import sys

import pytest

from macda.cli import main
from macda.fixtures import SMALL_PROTEIN, dataset_path
from macda.harness import EXIT_CONFIG, EXIT_DATA, EXIT_OK, RunConfig, execute
from macda.oracle import SurrogateSpec


def write_config(tmp_path, **extra):
    doc = {
        "dataset": dataset_path(),
        "drugs": ["phenol"],
        "protein": "SYN30",
        "output": "out",
        "train": {"episodes": 30, "seed": 2, "hidden": [16, 16]},
    }
    doc.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_run_matches_library_call(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--top-k", "4"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("Method")
    lib = execute(RunConfig.load(cfg).with_overrides(top_k=4, output=str(tmp_path / "lib")))
    assert (tmp_path / "out" / "records.jsonl").read_text() == lib.files["records.jsonl"].read_text()


def test_run_flags_override(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--method", "jointlist", "--out", str(tmp_path / "jl")]) == EXIT_OK
    doc = json.loads((tmp_path / "jl" / "report.json").read_text())
    assert doc["method"] == "jointlist"


def test_run_missing_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_run_data_error(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("drug_id,smiles,protein_id,sequence,pkd\nx,CC,P,AAAA,\n")
    cfg = write_config(tmp_path, dataset=str(data), drugs=None, protein=None, method="jointlist")
    assert main(["run", "--config", str(cfg)]) == EXIT_DATA


def test_eval(tmp_path, capsys):
    cfg = write_config(tmp_path)
    main(["run", "--config", str(cfg)])
    capsys.readouterr()
    records = tmp_path / "out" / "records.jsonl"
    assert main(["eval", str(records), "--oracle", "surrogate:0", "--out", str(tmp_path / "ev")]) == EXIT_OK
    assert "Method" in capsys.readouterr().out
    assert json.loads((tmp_path / "ev" / "report.json").read_text())["n"] == 10
    assert main(["eval", str(records), "--oracle", "surrogate:1"]) != EXIT_OK


def test_actions(capsys):
    assert main(["actions", "C", "--admissible", "C,N,O,F"]) == EXIT_OK
    assert len(json.loads(capsys.readouterr().out)) == 4
    assert main(["actions", "PFWKYY", "--protein"]) == EXIT_OK
    assert [a["mutation"] for a in json.loads(capsys.readouterr().out)][:2] == ["P0A", "F1A"]


def test_actions_bad_smiles(capsys):
    assert main(["actions", "C[C@H]O"]) == EXIT_DATA


def test_make_surrogate(tmp_path):
    out = tmp_path / "s.json"
    assert main(["oracle", "make-surrogate", "--seed", "0", "--planted", "--out", str(out)]) == EXIT_OK
    spec = SurrogateSpec.load(out)
    assert len(spec.interactions) == 1 and spec.interactions[0].strength == 2.0


def test_query_subprocess():
    proc = subprocess.run([sys.executable, "-m", "macda.cli", "oracle", "query", "--oracle", "surrogate:0"],
                          input=f"CCO\t{SMALL_PROTEIN}\n", capture_output=True, text=True, check=True)
    assert 0.0 <= float(proc.stdout) <= 15.0


def test_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
