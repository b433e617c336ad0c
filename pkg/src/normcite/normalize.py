"""Field-normalized citation scores.

A paper's normalized citation score is its citation count divided by the
mean citation count of reference papers from the same field and
publication year. Papers carrying several field assignments get the
arithmetic average of their per-field scores.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Optional, Sequence

from .errors import InputError
from .records import Dataset, FieldLevel, PubRecord

__all__ = [
    "CellStats",
    "RefRates",
    "FieldNcs",
    "NcsScore",
    "compute_ref_rates",
    "ncs",
    "score_set",
    "save_ref_rates",
    "load_ref_rates",
]

# exclusion reasons recorded in NcsScore.per_field
NO_REFERENCE_CELL = "no_reference_cell"
ZERO_MEAN_CELL = "zero_mean_cell"


@dataclass(frozen=True)
class CellStats:
    mean_citations: float
    paper_count: int

    def __post_init__(self):
        if self.paper_count < 1:
            raise InputError(f"cell paper_count must be >= 1, got {self.paper_count}")
        if self.mean_citations < 0:
            raise InputError(f"cell mean_citations must be >= 0, got {self.mean_citations}")


@dataclass(frozen=True)
class RefRates:
    """Expected citation rates: mean citation count per (field, year) cell,
    computed from a reference dataset at one field level."""

    level: FieldLevel
    cells: dict[tuple[str, int], CellStats]

    def lookup(self, field_id: str, pub_year: int) -> Optional[CellStats]:
        return self.cells.get((field_id, pub_year))


@dataclass(frozen=True)
class FieldNcs:
    """Per-field score of one paper: either a value or an exclusion reason."""

    field_id: str
    value: Optional[float] = None
    exclusion: Optional[str] = None


@dataclass(frozen=True)
class NcsScore:
    """Normalized score of one paper; ``value`` is absent when no field
    assignment yielded a defined per-field score."""

    record_id: str
    value: Optional[float]
    per_field: tuple[FieldNcs, ...]


def compute_ref_rates(
    reference: Dataset, level: FieldLevel, min_cell_size: int = 1
) -> RefRates:
    """Aggregate the reference dataset into (field, year) cells at the given
    level and store each cell's arithmetic mean citation count.

    A paper with k field assignments at the level contributes its full
    citation count to each of the k cells (no fractional weighting). Cells
    with fewer than ``min_cell_size`` papers are omitted.
    """
    if min_cell_size < 1:
        raise InputError(f"min_cell_size must be >= 1, got {min_cell_size}")
    sums: dict[tuple[str, int], int] = {}
    counts: dict[tuple[str, int], int] = {}
    any_assignment = False
    for rec in reference.records:
        for fa in rec.fields:
            if fa.level is not level:
                continue
            any_assignment = True
            key = (fa.field_id, rec.pub_year)
            sums[key] = sums.get(key, 0) + rec.citations
            counts[key] = counts.get(key, 0) + 1
    if not any_assignment:
        raise InputError(
            f"reference dataset {reference.source_label!r} has no field assignment "
            f"at level {level.value}"
        )
    cells = {
        key: CellStats(mean_citations=sums[key] / n, paper_count=n)
        for key, n in counts.items()
        if n >= min_cell_size
    }
    return RefRates(level=level, cells=cells)


def ncs(paper: PubRecord, rates: RefRates) -> NcsScore:
    """Score one paper against the reference rates.

    Each field assignment at the rates' level yields citations / cell mean;
    assignments whose cell is missing or has zero mean are excluded with a
    reason. The paper's value is the arithmetic mean of the defined
    per-field scores, absent if none are defined.
    """
    per_field = []
    defined = []
    for fa in paper.fields:
        if fa.level is not rates.level:
            continue
        cell = rates.lookup(fa.field_id, paper.pub_year)
        if cell is None:
            per_field.append(FieldNcs(field_id=fa.field_id, exclusion=NO_REFERENCE_CELL))
        elif cell.mean_citations == 0:
            per_field.append(FieldNcs(field_id=fa.field_id, exclusion=ZERO_MEAN_CELL))
        else:
            value = paper.citations / cell.mean_citations
            per_field.append(FieldNcs(field_id=fa.field_id, value=value))
            defined.append(value)
    value = fmean(defined) if defined else None
    return NcsScore(record_id=paper.record_id, value=value, per_field=tuple(per_field))


def score_set(papers: Sequence[PubRecord], rates: RefRates) -> list[NcsScore]:
    """Score a batch of papers, one output per input, order preserved."""
    return [ncs(p, rates) for p in papers]


def save_ref_rates(rates: RefRates, path) -> None:
    """Write rates as CSV ``level,field_id,pub_year,mean_citations,paper_count``
    (sorted by field and year) for auditing and reuse across runs."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "field_id", "pub_year", "mean_citations", "paper_count"])
        for (field_id, year), cell in sorted(rates.cells.items()):
            writer.writerow([rates.level.value, field_id, year, repr(cell.mean_citations), cell.paper_count])


def load_ref_rates(path) -> RefRates:
    """Read rates back from the CSV written by save_ref_rates."""
    path = Path(path)
    cells: dict[tuple[str, int], CellStats] = {}
    level: Optional[FieldLevel] = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["level", "field_id", "pub_year", "mean_citations", "paper_count"]:
            raise InputError(f"{path}: bad rates header {header!r}")
        for row in reader:
            if not row:
                continue
            where = f"{path} line {reader.line_num}"
            if len(row) != 5:
                raise InputError(f"{where}: expected 5 columns, got {len(row)}")
            try:
                row_level = FieldLevel(row[0])
                key = (row[1], int(row[2]))
                cell = CellStats(mean_citations=float(row[3]), paper_count=int(row[4]))
            except (ValueError, KeyError):
                raise InputError(f"{where}: malformed rates row {row!r}") from None
            if level is None:
                level = row_level
            elif row_level is not level:
                raise InputError(f"{where}: mixed levels {level.value} and {row_level.value}")
            cells[key] = cell
    if level is None:
        raise InputError(f"{path}: no rate rows")
    return RefRates(level=level, cells=cells)
