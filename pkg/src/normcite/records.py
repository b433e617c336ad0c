"""Publication records: data model, file ingestion, DOI canonicalization,
affiliation filtering, and DOI-based matching of two datasets.

File schema (CSV, header required)::

    record_id,doi,pub_year,citations,fields,affiliations

``fields`` is a ``;``-separated list of ``level:field_id`` tokens
(e.g. ``L1:machine_learning``); a bare ``field_id`` implies the FLAT
(non-hierarchical) level. ``affiliations`` is ``|``-separated free text.
The JSON variant is an array of objects with the same keys, ``fields`` as
an array of ``{"level": ..., "field_id": ...}`` objects. UTF-8 throughout.

Because ``;`` and ``|`` act as separators inside CSV cells, field ids must
not contain ``;`` or ``:`` and affiliation strings must not contain ``|``
when the CSV format is used; the JSON format has no such restriction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import InputError

__all__ = [
    "FieldLevel",
    "FieldAssignment",
    "PubRecord",
    "Dataset",
    "MatchedPairs",
    "normalize_doi",
    "load_dataset",
    "save_dataset",
    "filter_by_affiliation",
    "match_by_doi",
]


class FieldLevel(str, Enum):
    """Hierarchy level of a field assignment; FLAT covers journal-based
    subject schemes with no hierarchy."""

    L0 = "L0"
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    FLAT = "FLAT"


@dataclass(frozen=True)
class FieldAssignment:
    field_id: str
    level: FieldLevel


@dataclass(frozen=True)
class PubRecord:
    """One publication: identifiers, year, citation count, field
    assignments, and affiliation strings."""

    record_id: str
    doi: Optional[str]
    pub_year: int
    citations: int
    fields: tuple[FieldAssignment, ...]
    affiliations: tuple[str, ...]
    source_label: str

    def __post_init__(self):
        if not self.record_id:
            raise InputError("record_id must be non-empty")
        if self.citations < 0:
            raise InputError(
                f"record {self.record_id!r}: citations must be >= 0, got {self.citations}"
            )


@dataclass(frozen=True)
class Dataset:
    records: tuple[PubRecord, ...]
    source_label: str

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.record_id in seen:
                raise InputError(f"duplicate record_id {rec.record_id!r} in dataset")
            seen.add(rec.record_id)
            if rec.source_label != self.source_label:
                raise InputError(
                    f"record {rec.record_id!r} has source_label {rec.source_label!r}, "
                    f"dataset expects {self.source_label!r}"
                )

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class MatchedPairs:
    """Result of joining two datasets on canonical DOI.

    DOIs occurring more than once within one dataset are excluded from
    matching; the records bearing them are listed in ``ambiguous_a`` /
    ``ambiguous_b``. ``unmatched_a`` / ``unmatched_b`` count the remaining
    records that found no partner (including records without a DOI).
    """

    pairs: tuple[tuple[PubRecord, PubRecord], ...]
    unmatched_a: int
    unmatched_b: int
    ambiguous_a: tuple[str, ...] = field(default=())
    ambiguous_b: tuple[str, ...] = field(default=())


_DOI_PREFIXES = ("https://doi.org/", "http://doi.org/", "doi:")

_CSV_HEADER = ["record_id", "doi", "pub_year", "citations", "fields", "affiliations"]


def normalize_doi(raw: Optional[str]) -> Optional[str]:
    """Canonicalize a DOI string: lowercase, trim whitespace, strip
    ``https://doi.org/`` / ``http://doi.org/`` / ``doi:`` prefixes.

    Returns None for empty results or strings not starting with ``10.``
    (an absent value signals an unusable DOI, never an error).
    """
    if raw is None:
        return None
    doi = raw.strip().lower()
    stripped = True
    while stripped:
        stripped = False
        for prefix in _DOI_PREFIXES:
            if doi.startswith(prefix):
                doi = doi[len(prefix):].strip()
                stripped = True
    if not doi or not doi.startswith("10."):
        return None
    return doi


def _parse_field_token(token: str) -> FieldAssignment:
    token = token.strip()
    if ":" in token:
        level_str, _, field_id = token.partition(":")
        try:
            level = FieldLevel(level_str)
        except ValueError:
            raise InputError(f"unknown field level {level_str!r} in token {token!r}") from None
        if not field_id:
            raise InputError(f"empty field_id in token {token!r}")
        return FieldAssignment(field_id=field_id, level=level)
    return FieldAssignment(field_id=token, level=FieldLevel.FLAT)


def _dedupe_fields(assignments: Iterable[FieldAssignment]) -> tuple[FieldAssignment, ...]:
    # Keeps first occurrence; prevents double-weighting a field in the
    # multi-field average downstream.
    seen = set()
    out = []
    for fa in assignments:
        key = (fa.field_id, fa.level)
        if key not in seen:
            seen.add(key)
            out.append(fa)
    return tuple(out)


def _record_from_parts(
    where: str,
    record_id: str,
    doi: Optional[str],
    pub_year,
    citations,
    fields: Sequence[FieldAssignment],
    affiliations: Sequence[str],
    source_label: str,
) -> PubRecord:
    if not record_id:
        raise InputError(f"{where}: missing record_id")
    try:
        year = int(pub_year)
    except (TypeError, ValueError):
        raise InputError(f"{where}: missing or invalid pub_year {pub_year!r}") from None
    try:
        cites = int(citations)
    except (TypeError, ValueError):
        raise InputError(f"{where}: missing or invalid citations {citations!r}") from None
    if cites < 0:
        raise InputError(f"{where}: citations must be >= 0, got {cites}")
    return PubRecord(
        record_id=record_id,
        doi=normalize_doi(doi),
        pub_year=year,
        citations=cites,
        fields=_dedupe_fields(fields),
        affiliations=tuple(a for a in affiliations if a),
        source_label=source_label,
    )


def _load_csv(path: Path, source_label: str) -> list[PubRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: missing header row") from None
        if header != _CSV_HEADER:
            raise InputError(
                f"{path}: bad header {header!r}, expected {_CSV_HEADER!r}"
            )
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            where = f"{path} line {reader.line_num}"
            if len(row) != len(_CSV_HEADER):
                raise InputError(f"{where}: expected {len(_CSV_HEADER)} columns, got {len(row)}")
            rid, doi, year, cites, fields_cell, affil_cell = row
            fields = [_parse_field_token(t) for t in fields_cell.split(";") if t.strip()]
            affiliations = [a for a in affil_cell.split("|") if a]
            records.append(
                _record_from_parts(where, rid, doi, year, cites, fields, affiliations, source_label)
            )
    return records


def _load_json(path: Path, source_label: str) -> list[PubRecord]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise InputError(f"{path}: top-level JSON value must be an array")
    records = []
    for i, obj in enumerate(data):
        where = f"{path} object {i + 1}"
        if not isinstance(obj, dict):
            raise InputError(f"{where}: expected an object")
        fields = []
        for fa in obj.get("fields", []):
            try:
                level = FieldLevel(fa["level"])
                field_id = fa["field_id"]
            except (TypeError, KeyError, ValueError):
                raise InputError(f"{where}: malformed field assignment {fa!r}") from None
            if not field_id:
                raise InputError(f"{where}: empty field_id")
            fields.append(FieldAssignment(field_id=field_id, level=level))
        affiliations = obj.get("affiliations") or []
        if not isinstance(affiliations, list):
            raise InputError(f"{where}: affiliations must be an array")
        records.append(
            _record_from_parts(
                where,
                obj.get("record_id", ""),
                obj.get("doi"),
                obj.get("pub_year"),
                obj.get("citations"),
                fields,
                affiliations,
                source_label,
            )
        )
    return records


def load_dataset(path, format: str, source_label: str) -> Dataset:
    """Load a publication dataset from ``path``.

    ``format`` is ``"csv"`` or ``"json"``. Duplicate field assignments are
    dropped, DOIs canonicalized. Malformed rows and duplicate record ids
    reject the whole file with a message naming the offending row.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    if format == "csv":
        records = _load_csv(path, source_label)
    elif format == "json":
        records = _load_json(path, source_label)
    else:
        raise InputError(f"unknown format {format!r}, expected 'csv' or 'json'")
    return Dataset(records=tuple(records), source_label=source_label)


def _field_token(fa: FieldAssignment) -> str:
    if fa.level is FieldLevel.FLAT:
        return fa.field_id
    return f"{fa.level.value}:{fa.field_id}"


def save_dataset(ds: Dataset, path, format: str) -> None:
    """Write a dataset back to disk in the record schema; inverse of
    load_dataset up to DOI canonicalization."""
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for rec in ds.records:
                writer.writerow(
                    [
                        rec.record_id,
                        rec.doi or "",
                        rec.pub_year,
                        rec.citations,
                        ";".join(_field_token(fa) for fa in rec.fields),
                        "|".join(rec.affiliations),
                    ]
                )
    elif format == "json":
        objs = [
            {
                "record_id": rec.record_id,
                "doi": rec.doi,
                "pub_year": rec.pub_year,
                "citations": rec.citations,
                "fields": [{"level": fa.level.value, "field_id": fa.field_id} for fa in rec.fields],
                "affiliations": list(rec.affiliations),
            }
            for rec in ds.records
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(objs, fh, indent=2, ensure_ascii=False)
            fh.write("\n")
    else:
        raise InputError(f"unknown format {format!r}, expected 'csv' or 'json'")


def filter_by_affiliation(
    ds: Dataset,
    include_variants: Sequence[str],
    exclude_ids: Sequence[str] = (),
) -> Dataset:
    """Keep records whose affiliation text contains any of the address
    variants (case-insensitive substring match), then drop records whose
    id is in ``exclude_ids`` (manually identified false positives)."""
    if not include_variants:
        raise InputError("include_variants must be non-empty")
    variants = [v.lower() for v in include_variants]
    excluded = set(exclude_ids)
    kept = []
    for rec in ds.records:
        if rec.record_id in excluded:
            continue
        text = [a.lower() for a in rec.affiliations]
        if any(v in a for v in variants for a in text):
            kept.append(rec)
    return Dataset(records=tuple(kept), source_label=ds.source_label)


def match_by_doi(a: Dataset, b: Dataset) -> MatchedPairs:
    """Pair records of two datasets on equal canonical DOI.

    Records without a DOI never match. A DOI occurring more than once
    within one dataset is excluded from matching entirely; its records are
    reported as ambiguous rather than matched arbitrarily.
    """
    by_doi_a: dict[str, list[PubRecord]] = {}
    by_doi_b: dict[str, list[PubRecord]] = {}
    for rec in a.records:
        if rec.doi:
            by_doi_a.setdefault(rec.doi, []).append(rec)
    for rec in b.records:
        if rec.doi:
            by_doi_b.setdefault(rec.doi, []).append(rec)

    ambiguous_a = tuple(
        rec.record_id for recs in by_doi_a.values() if len(recs) > 1 for rec in recs
    )
    ambiguous_b = tuple(
        rec.record_id for recs in by_doi_b.values() if len(recs) > 1 for rec in recs
    )

    pairs = []
    for rec in a.records:  # iteration over A fixes the pair order
        doi = rec.doi
        if doi is None or len(by_doi_a[doi]) > 1:
            continue
        partners = by_doi_b.get(doi)
        if partners is None or len(partners) > 1:
            continue
        pairs.append((rec, partners[0]))

    unmatched_a = len(a.records) - len(pairs) - len(ambiguous_a)
    unmatched_b = len(b.records) - len(pairs) - len(ambiguous_b)
    return MatchedPairs(
        pairs=tuple(pairs),
        unmatched_a=unmatched_a,
        unmatched_b=unmatched_b,
        ambiguous_a=ambiguous_a,
        ambiguous_b=ambiguous_b,
    )
