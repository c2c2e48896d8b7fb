"""Run configuration, dataset loading and orchestration of a full run."""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from macda.errors import ConfigError, DataError, EmptyActionSpaceError, MacdaError, SequenceError, SmilesError
from macda.marl import METHODS, CounterfactualRecord, TrainConfig
from macda.metrics import evaluate, format_table, mutation_histogram
from macda.oracle import AffinityOracle, load_oracle
from macda.protein import ProteinSeq
from macda.reward import RewardWeights
from macda.smiles import parse_smiles

log = logging.getLogger(__name__)

HEADER = ["drug_id", "smiles", "protein_id", "sequence", "pkd"]
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
OUTPUT_FILES = ("records.jsonl", "report.json", "report.txt", "mutations.csv")


@dataclass(frozen=True)
class DatasetRow:
    drug_id: str
    smiles: str
    protein_id: str
    sequence: str
    pkd: float | None = None
    line: int = 0

    @property
    def drug(self):
        return parse_smiles(self.smiles)

    @property
    def protein(self) -> ProteinSeq:
        return ProteinSeq(self.sequence)


def load_dataset(path) -> list[DatasetRow]:
    """Read and validate a ``drug_id,smiles,protein_id,sequence,pkd`` CSV.

    All invalid rows are reported together, each with its line number.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no rows") from None
        except csv.Error as exc:
            raise DataError(f"{path}: malformed CSV: {exc}") from None
        if [h.strip() for h in header] != HEADER:
            raise DataError(f"{path}: expected header {','.join(HEADER)}, got {','.join(header)}")
        rows, problems = [], []
        try:
            for fields in reader:
                line = reader.line_num
                if not fields or all(not f.strip() for f in fields):
                    continue
                if len(fields) != len(HEADER):
                    problems.append(f"line {line}: expected {len(HEADER)} fields, got {len(fields)}")
                    continue
                drug_id, smiles, protein_id, sequence, pkd = (f.strip() for f in fields)
                try:
                    parse_smiles(smiles)
                except SmilesError as exc:
                    problems.append(f"line {line}: invalid SMILES at byte offset {exc.offset}: {exc.reason}")
                    continue
                try:
                    ProteinSeq(sequence)
                except SequenceError as exc:
                    problems.append(f"line {line}: invalid sequence: {exc}")
                    continue
                try:
                    value = float(pkd) if pkd else None
                except ValueError:
                    problems.append(f"line {line}: pkd {pkd!r} is not a number")
                    continue
                rows.append(DatasetRow(drug_id, smiles, protein_id, sequence, value, line))
        except csv.Error as exc:
            raise DataError(f"{path}: malformed CSV near line {reader.line_num}: {exc}") from None
    if problems:
        raise DataError(f"{path}: " + "; ".join(problems))
    if not rows:
        raise DataError(f"{path}: no rows")
    return rows


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; an empty ``train`` section means default hyper-parameters.

    Relative paths are resolved against ``base_dir`` (the config file's directory).
    """

    dataset: str
    oracle: str = "surrogate:0"
    method: str = "macda"
    drugs: tuple[str, ...] | None = None
    protein: str | None = None
    output: str = "out"
    train: TrainConfig = TrainConfig()
    base_dir: str = "."

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {sorted(METHODS)}, got {self.method!r}")

    @property
    def top_k(self) -> int:
        return self.train.top_k

    @property
    def weights(self) -> RewardWeights:
        return self.train.weights

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def validate(self) -> RunConfig:
        if not self.resolve(self.dataset).is_file():
            raise ConfigError(f"dataset not found: {self.resolve(self.dataset)}")
        if ":" not in self.oracle and not self.resolve(self.oracle).is_file():
            raise ConfigError(f"oracle spec not found: {self.resolve(self.oracle)}")
        return self

    def with_overrides(self, method=None, seed=None, episodes=None, top_k=None, output=None) -> RunConfig:
        train = self.train
        changes = {k: v for k, v in (("seed", seed), ("episodes", episodes), ("top_k", top_k)) if v is not None}
        try:
            train = replace(train, **changes) if changes else train
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return replace(self, method=method or self.method, train=train, output=output or self.output)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "oracle": self.oracle,
            "method": self.method,
            "drugs": None if self.drugs is None else list(self.drugs),
            "protein": self.protein,
            "output": self.output,
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = ".") -> RunConfig:
        doc = dict(doc)
        allowed = {"dataset", "oracle", "method", "drugs", "protein", "output", "train", "weights", "top_k"}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in doc:
            raise ConfigError("config needs a 'dataset' path")
        train = dict(doc.pop("train", {}) or {})
        if "weights" in doc:
            train["weights"] = doc.pop("weights")
        if "top_k" in doc:
            train["top_k"] = doc.pop("top_k")
        try:
            doc["train"] = TrainConfig.from_dict(train)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid training options: {exc}") from None
        if doc.get("drugs") is not None:
            doc["drugs"] = tuple(doc["drugs"])
        return cls(base_dir=base_dir, **doc)

    @classmethod
    def load(cls, path) -> RunConfig:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(doc, base_dir=str(path.parent))


def select_pairs(rows: Sequence[DatasetRow], drugs: Sequence[str] | None = None,
                 protein: str | None = None) -> list[tuple]:
    """Reference pairs as ``(drug, protein, drug_id, protein_id)``.

    With ``protein`` set, every selected drug is paired with that target;
    otherwise each distinct (drug, protein) row is its own pair.
    """
    by_drug: dict[str, DatasetRow] = {}
    sequences: dict[str, str] = {}
    for row in rows:
        by_drug.setdefault(row.drug_id, row)
        seq = sequences.setdefault(row.protein_id, row.sequence)
        if seq != row.sequence:
            raise DataError(f"line {row.line}: protein {row.protein_id} has two different sequences")
    wanted = list(drugs) if drugs is not None else list(by_drug)
    missing = [d for d in wanted if d not in by_drug]
    if missing:
        raise DataError(f"drug ids not in dataset: {missing}")
    if protein is not None:
        if protein not in sequences:
            raise DataError(f"protein id not in dataset: {protein}")
        return [(by_drug[d].drug, ProteinSeq(sequences[protein]), d, protein) for d in wanted]
    pairs, seen = [], set()
    for row in rows:
        key = (row.drug_id, row.protein_id)
        if row.drug_id in wanted and key not in seen:
            seen.add(key)
            pairs.append((row.drug, row.protein, row.drug_id, row.protein_id))
    return pairs


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunResult:
    records: list[CounterfactualRecord]
    report: dict
    table: str
    output_dir: Path
    files: dict[str, Path] = field(default_factory=dict)


def execute(config: RunConfig, oracle: AffinityOracle | None = None) -> RunResult:
    """Run the configured method on every selected pair and write the outputs.

    Raises the underlying errors; :func:`run` maps them to exit codes.
    """
    config.validate()
    rows = load_dataset(config.resolve(config.dataset))
    pairs = select_pairs(rows, config.drugs, config.protein)
    if oracle is None:
        try:
            oracle = load_oracle(str(config.resolve(config.oracle)) if ":" not in config.oracle else config.oracle)
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"cannot load oracle {config.oracle!r}: {exc}") from None
    log.info("running %s on %d pair(s)", config.method, len(pairs))
    records = METHODS[config.method](pairs, oracle, config.train)

    hist = mutation_histogram(records)
    report = evaluate(records) if records else None
    doc = {
        "method": config.method,
        "pairs": len(pairs),
        "report": None if report is None else report.to_dict(),
        "mutations": {"counts": {str(k): v for k, v in hist.counts.items()}, "total": hist.total},
        "config": config.to_dict(),
    }
    table = format_table([report]) if report is not None else "no counterfactuals (episodes = 0)\n"

    out = config.resolve(config.output)
    out.mkdir(parents=True, exist_ok=True)
    files = {name: out / name for name in OUTPUT_FILES}
    lines = "".join(rec.to_json() + "\n" for rec in records)
    _atomic_write(files["records.jsonl"], lines)
    _atomic_write(files["report.json"], json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _atomic_write(files["report.txt"], table)
    _atomic_write(files["mutations.csv"], hist.to_csv())
    return RunResult(records, doc, table, out, files)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, SmilesError, SequenceError, EmptyActionSpaceError)):
        return EXIT_DATA
    return EXIT_RUNTIME


def run(config: RunConfig, oracle: AffinityOracle | None = None, echo=print) -> int:
    """Execute a run and return its exit status (0, or 2/3/4 for config/data/runtime errors)."""
    try:
        result = execute(config, oracle)
    except (MacdaError, OSError) as exc:
        log.error("%s", exc)
        return exit_code(exc)
    if echo is not None:
        echo(result.table.rstrip("\n"))
    return EXIT_OK


__all__ = [
    "DatasetRow",
    "RunConfig",
    "RunResult",
    "execute",
    "exit_code",
    "load_dataset",
    "run",
    "select_pairs",
]
