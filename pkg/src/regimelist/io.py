"""File formats: dataset CSV + schema JSON, decision-list JSON, pretty print.

The dataset lives in two files: a CSV with a header row, and a companion
schema JSON describing each column (kind, levels, assessment cost), the
treatment and outcome column names, and the treatment -> cost map.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .domain import (
    REAL,
    CharacteristicSpec,
    Dataset,
    DecisionList,
    Pattern,
    Predicate,
)
from .errors import ValidationError


@dataclass(frozen=True)
class DataSchema:
    """Companion schema for a dataset CSV."""

    specs: tuple[CharacteristicSpec, ...]
    treatment_names: tuple[str, ...]
    treatment_costs: tuple[float, ...]
    treatment_column: str = "treatment"
    outcome_column: str = "outcome"

    def __post_init__(self) -> None:
        names = [s.name for s in self.specs]
        if len(names) != len(set(names)):
            raise ValidationError("duplicate characteristic names in schema")
        if len(self.treatment_names) != len(set(self.treatment_names)):
            raise ValidationError("duplicate treatment names in schema")
        if len(self.treatment_costs) != len(self.treatment_names):
            raise ValidationError("treatment costs must match treatment names")
        reserved = {self.treatment_column, self.outcome_column}
        if reserved & set(names):
            raise ValidationError(
                "characteristic names collide with the treatment/outcome columns"
            )

    def to_dict(self) -> dict:
        chars = []
        for s in self.specs:
            entry: dict = {"name": s.name, "kind": s.kind, "cost": s.cost}
            if s.kind != REAL:
                entry["levels"] = list(s.levels)
            chars.append(entry)
        return {
            "characteristics": chars,
            "treatment_column": self.treatment_column,
            "outcome_column": self.outcome_column,
            "treatments": {n: c for n, c in zip(self.treatment_names, self.treatment_costs)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DataSchema":
        try:
            specs = tuple(
                CharacteristicSpec(
                    name=c["name"],
                    kind=c["kind"],
                    cost=float(c["cost"]),
                    levels=tuple(c.get("levels", ())),
                )
                for c in d["characteristics"]
            )
            treatments = d["treatments"]
            names = tuple(treatments.keys())
            costs = tuple(float(treatments[n]) for n in names)
            return cls(
                specs=specs,
                treatment_names=names,
                treatment_costs=costs,
                treatment_column=d.get("treatment_column", "treatment"),
                outcome_column=d.get("outcome_column", "outcome"),
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed schema: {e!r}") from None


def read_schema(path: str | Path) -> DataSchema:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: invalid JSON ({e})") from None
    return DataSchema.from_dict(d)


def write_schema(schema: DataSchema, path: str | Path) -> None:
    write_json(schema.to_dict(), path)


def _format_cell(spec: CharacteristicSpec, value) -> str:
    if spec.kind == REAL:
        return repr(float(value))
    return str(value)


def read_dataset(csv_path: str | Path, schema: DataSchema) -> Dataset:
    """Load and validate a dataset CSV against its schema."""
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{csv_path}: empty file") from None
        col_of = {name: k for k, name in enumerate(header)}
        needed = [s.name for s in schema.specs] + [schema.treatment_column, schema.outcome_column]
        for name in needed:
            if name not in col_of:
                raise ValidationError(f"{csv_path}: missing column {name!r}")
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(header):
                raise ValidationError(
                    f"{csv_path}: line {lineno}: expected {len(header)} cells, got {len(cells)}"
                )
            values = []
            for s in schema.specs:
                cell = cells[col_of[s.name]]
                if s.kind == REAL:
                    try:
                        values.append(float(cell))
                    except ValueError:
                        raise ValidationError(
                            f"{csv_path}: line {lineno}, field {s.name!r}: non-numeric {cell!r}"
                        ) from None
                else:
                    values.append(cell)
            a = cells[col_of[schema.treatment_column]]
            try:
                y = float(cells[col_of[schema.outcome_column]])
            except ValueError:
                raise ValidationError(
                    f"{csv_path}: line {lineno}, field {schema.outcome_column!r}: "
                    f"non-numeric {cells[col_of[schema.outcome_column]]!r}"
                ) from None
            rows.append((values, a, y))
    try:
        return Dataset.from_rows(schema.specs, schema.treatment_names, schema.treatment_costs, rows)
    except ValidationError as e:
        # from_rows reports 0-based row indices; translate to file lines
        msg = re.sub(r"\brow (\d+)", lambda m: f"line {int(m.group(1)) + 2}", str(e))
        raise ValidationError(f"{csv_path}: {msg}") from None


def write_dataset_csv(ds: Dataset, path: str | Path,
                      treatment_column: str = "treatment",
                      outcome_column: str = "outcome") -> None:
    """Write a dataset CSV; reals use repr() so output is byte-reproducible."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([s.name for s in ds.specs] + [treatment_column, outcome_column])
        for i in range(ds.n_subjects):
            cells = [_format_cell(s, v) for s, v in zip(ds.specs, ds.row(i))]
            cells.append(ds.treatment_names[ds.treatments[i]])
            cells.append(repr(float(ds.outcomes[i])))
            writer.writerow(cells)


def decision_list_to_dict(
    dl: DecisionList,
    specs: Sequence[CharacteristicSpec],
    treatment_names: Sequence[str],
) -> dict:
    def pred_dict(p: Predicate) -> dict:
        return {"feature": specs[p.feature].name, "op": p.op, "value": p.value}

    return {
        "rules": [
            {
                "pattern": [pred_dict(p) for p in pattern.predicates],
                "treatment": treatment_names[t],
            }
            for pattern, t in dl.rules
        ],
        "default_treatment": treatment_names[dl.default_treatment],
    }


def decision_list_from_dict(
    d: dict,
    specs: Sequence[CharacteristicSpec],
    treatment_names: Sequence[str],
) -> DecisionList:
    name_to_idx = {s.name: i for i, s in enumerate(specs)}
    treat_to_code = {n: k for k, n in enumerate(treatment_names)}
    try:
        rules = []
        for r in d["rules"]:
            preds = tuple(
                Predicate(feature=name_to_idx[p["feature"]], op=p["op"], value=p["value"])
                for p in r["pattern"]
            )
            rules.append((Pattern(preds), treat_to_code[r["treatment"]]))
        return DecisionList(
            rules=tuple(rules),
            default_treatment=treat_to_code[d["default_treatment"]],
        )
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed decision list: {e!r}") from None


def format_decision_list(
    dl: DecisionList,
    specs: Sequence[CharacteristicSpec],
    treatment_names: Sequence[str],
) -> str:
    """Human-readable if / else-if / else rendering of a decision list."""
    def fmt_value(p: Predicate) -> str:
        if specs[p.feature].kind == REAL:
            return f"{float(p.value):g}"
        return str(p.value)

    def fmt_pattern(pattern: Pattern) -> str:
        return " and ".join(
            f"{specs[p.feature].name} {p.op} {fmt_value(p)}" for p in pattern.predicates
        )

    if not dl.rules:
        return f"always {treatment_names[dl.default_treatment]}"
    lines = []
    for j, (pattern, t) in enumerate(dl.rules):
        kw = "if" if j == 0 else "else if"
        lines.append(f"{kw} {fmt_pattern(pattern)} then {treatment_names[t]}")
    lines.append(f"else {treatment_names[dl.default_treatment]}")
    return "\n".join(lines)


def write_json(obj, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_json(path: str | Path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: invalid JSON ({e})") from None


def write_jsonl(records: Sequence[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec))
            fh.write("\n")
