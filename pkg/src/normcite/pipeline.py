"""End-to-end orchestration: load two focal and two reference datasets,
match by DOI, normalize citations per source, classify, compare, and emit
a machine-readable report plus plot data.

Outputs written to the run's output directory:

* ``report.json`` - every statistic, 6 significant digits, fixed key order
  (deterministic: identical config and inputs give identical bytes).
* ``scatter.csv`` - one row per scored pair: record_id (from source A),
  ncs_a, ncs_b, class_a, class_b.
* ``means.csv`` - rows a / b / diff with mean and confidence bounds.
"""

from __future__ import annotations

import csv
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .css import CssClassification, class_shares, css_classify
from .errors import InputError, NormciteError, UndefinedStatisticError
from .normalize import compute_ref_rates, ncs
from .records import Dataset, FieldLevel, filter_by_affiliation, load_dataset, match_by_doi, MatchedPairs
from .stats import (
    ContingencyTable,
    IntervalEstimate,
    LinearFit,
    OffDiagonal,
    PairedMeans,
    PairedSeries,
    agreement_share,
    cohen_kappa,
    contingency,
    interpret_ccc,
    interpret_kappa,
    lin_ccc,
    off_by_more_than_one,
    ols_fit,
    paired_mean_ci,
    pearson,
    spearman,
)

__all__ = ["RunConfig", "ScoredPair", "ConcordanceReport", "run", "emit_plot_data", "write_match_audit"]

log = logging.getLogger("normcite")

REPORT_NAME = "report.json"
SCATTER_NAME = "scatter.csv"
MEANS_NAME = "means.csv"


def detect_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix == ".csv":
        return "csv"
    raise InputError(f"cannot infer format from {path} (expected .csv or .json)")


@dataclass(frozen=True)
class RunConfig:
    focal_a: Path
    focal_b: Path
    ref_a: Path
    ref_b: Path
    level_a: FieldLevel
    level_b: FieldLevel
    out_dir: Path
    min_cell_size: int = 1
    css_iterations: int = 3
    confidence: float = 0.95
    affiliation_variants: tuple[str, ...] = ()
    exclude_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise InputError(f"confidence must be in (0,1), got {self.confidence}")
        inputs = {Path(p).resolve() for p in (self.focal_a, self.focal_b, self.ref_a, self.ref_b)}
        out = Path(self.out_dir).resolve()
        outputs = {out / REPORT_NAME, out / SCATTER_NAME, out / MEANS_NAME}
        if inputs & outputs:
            raise InputError("input paths must be distinct from output paths")


@dataclass(frozen=True)
class ScoredPair:
    record_id: str
    ncs_a: float
    ncs_b: float
    class_a: int
    class_b: int


@dataclass(frozen=True)
class ConcordanceReport:
    source_a: str
    source_b: str
    level_a: FieldLevel
    level_b: FieldLevel
    min_cell_size: int
    css_iterations: int
    confidence: float
    n_focal_a: int
    n_focal_b: int
    n_filtered_a: int
    n_filtered_b: int
    n_reference_a: int
    n_reference_b: int
    n_matched: int
    n_ambiguous_a: int
    n_ambiguous_b: int
    n_unmatched_a: int
    n_unmatched_b: int
    n_scored: int
    dropped_undefined_a: int
    dropped_undefined_b: int
    dropped_undefined_both: int
    pearson: float
    spearman: float
    ccc: IntervalEstimate
    ccc_band: str
    means: PairedMeans
    regression: LinearFit
    css_a: CssClassification
    css_b: CssClassification
    table: ContingencyTable
    agreement: float
    off_by_more_than_one: OffDiagonal
    kappa: float
    kappa_band: str

    def to_json_dict(self) -> dict:
        """Report content with fixed key order and floats at 6 significant
        digits; serializing this dict is byte-deterministic."""

        def interval(ci: IntervalEstimate) -> dict:
            return {
                "point": _sig6(ci.point),
                "lower": _sig6(ci.lower),
                "upper": _sig6(ci.upper),
                "level": _sig6(ci.level),
            }

        def classification(c: CssClassification) -> dict:
            return {
                "thresholds": [_sig6(m) for m in c.thresholds],
                "class_names": list(c.class_names),
                "shares": [_sig6(v) for v in class_shares(c)],
                "degenerate": c.degenerate,
            }

        return {
            "sources": {"a": self.source_a, "b": self.source_b},
            "parameters": {
                "level_a": self.level_a.value,
                "level_b": self.level_b.value,
                "min_cell_size": self.min_cell_size,
                "css_iterations": self.css_iterations,
                "confidence": _sig6(self.confidence),
            },
            "counts": {
                "focal_a_loaded": self.n_focal_a,
                "focal_b_loaded": self.n_focal_b,
                "focal_a_filtered": self.n_filtered_a,
                "focal_b_filtered": self.n_filtered_b,
                "reference_a": self.n_reference_a,
                "reference_b": self.n_reference_b,
                "matched": self.n_matched,
                "ambiguous_a": self.n_ambiguous_a,
                "ambiguous_b": self.n_ambiguous_b,
                "unmatched_a": self.n_unmatched_a,
                "unmatched_b": self.n_unmatched_b,
                "scored": self.n_scored,
                "dropped_undefined_a": self.dropped_undefined_a,
                "dropped_undefined_b": self.dropped_undefined_b,
                "dropped_undefined_both": self.dropped_undefined_both,
            },
            "correlation": {
                "pearson": _sig6(self.pearson),
                "spearman": _sig6(self.spearman),
            },
            "concordance": {**interval(self.ccc), "interpretation": self.ccc_band},
            "means": {
                "a": interval(self.means.mean_x),
                "b": interval(self.means.mean_y),
                "diff": interval(self.means.diff),
            },
            "regression": {
                "slope": _sig6(self.regression.slope),
                "intercept": _sig6(self.regression.intercept),
            },
            "classes": {"a": classification(self.css_a), "b": classification(self.css_b)},
            "agreement": {
                "table": {
                    "rows": "a",
                    "columns": "b",
                    "row_labels": list(self.table.row_labels),
                    "col_labels": list(self.table.col_labels),
                    "counts": [list(row) for row in self.table.counts],
                },
                "share": _sig6(self.agreement),
                "off_by_more_than_one": {
                    "count": self.off_by_more_than_one.count,
                    "share": _sig6(self.off_by_more_than_one.share),
                },
                "kappa": _sig6(self.kappa),
                "kappa_interpretation": self.kappa_band,
            },
        }


def _sig6(x: float) -> float:
    return float(f"{float(x):.6g}")


def _fmt6(x: float) -> str:
    return f"{float(x):.6g}"


@contextmanager
def _stage(name: str):
    # re-raise module errors with the failing pipeline stage named
    try:
        yield
    except NormciteError as exc:
        exc.args = (f"[{name}] {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise


def _pad_names(names: Sequence[str], k: int) -> tuple[str, ...]:
    names = tuple(names)
    return names + tuple(f"class {i}" for i in range(len(names), k))


def run(config: RunConfig) -> ConcordanceReport:
    """Execute the full comparison and write report.json, scatter.csv and
    means.csv into ``config.out_dir``. Deterministic for fixed inputs."""
    with _stage("load"):
        focal_a = load_dataset(config.focal_a, detect_format(config.focal_a), Path(config.focal_a).stem)
        focal_b = load_dataset(config.focal_b, detect_format(config.focal_b), Path(config.focal_b).stem)
        ref_a = load_dataset(config.ref_a, detect_format(config.ref_a), Path(config.ref_a).stem)
        ref_b = load_dataset(config.ref_b, detect_format(config.ref_b), Path(config.ref_b).stem)
    n_focal_a, n_focal_b = len(focal_a), len(focal_b)

    if config.affiliation_variants:
        with _stage("affiliation filter"):
            focal_a = filter_by_affiliation(focal_a, config.affiliation_variants, config.exclude_ids)
            focal_b = filter_by_affiliation(focal_b, config.affiliation_variants, config.exclude_ids)
    log.info("focal A (%s): %d loaded, %d after affiliation filter", focal_a.source_label, n_focal_a, len(focal_a))
    log.info("focal B (%s): %d loaded, %d after affiliation filter", focal_b.source_label, n_focal_b, len(focal_b))

    with _stage("reference rates"):
        rates_a = compute_ref_rates(ref_a, config.level_a, config.min_cell_size)
        rates_b = compute_ref_rates(ref_b, config.level_b, config.min_cell_size)
    log.info("reference A: %d papers, %d cells at %s", len(ref_a), len(rates_a.cells), config.level_a.value)
    log.info("reference B: %d papers, %d cells at %s", len(ref_b), len(rates_b.cells), config.level_b.value)

    with _stage("doi match"):
        matched = match_by_doi(focal_a, focal_b)
    log.info(
        "matched pairs: %d (ambiguous: %d in A, %d in B; unmatched: %d in A, %d in B)",
        len(matched.pairs), len(matched.ambiguous_a), len(matched.ambiguous_b),
        matched.unmatched_a, matched.unmatched_b,
    )

    with _stage("scoring"):
        scored_values = []
        dropped_a = dropped_b = dropped_both = 0
        for rec_a, rec_b in matched.pairs:
            value_a = ncs(rec_a, rates_a).value
            value_b = ncs(rec_b, rates_b).value
            if value_a is None and value_b is None:
                dropped_both += 1
            elif value_a is None:
                dropped_a += 1
            elif value_b is None:
                dropped_b += 1
            else:
                scored_values.append((rec_a.record_id, value_a, value_b))
    log.info(
        "scored pairs: %d (dropped: %d undefined in A, %d in B, %d in both)",
        len(scored_values), dropped_a, dropped_b, dropped_both,
    )
    if len(scored_values) < 3:
        raise UndefinedStatisticError(
            f"[scoring] fewer than 3 scored pairs ({len(scored_values)}); statistics undefined"
        )

    series = PairedSeries(
        x=tuple(v[1] for v in scored_values),
        y=tuple(v[2] for v in scored_values),
        ids=tuple(v[0] for v in scored_values),
    )

    with _stage("statistics"):
        r_p = pearson(series)
        r_s = spearman(series)
        ccc = lin_ccc(series, config.confidence)
        means = paired_mean_ci(series, config.confidence)
        fit = ols_fit(series)

    with _stage("classification"):
        css_a = css_classify(series.x, config.css_iterations)
        css_b = css_classify(series.y, config.css_iterations)
        k = max(css_a.n_classes, css_b.n_classes)
        table = contingency(
            css_a.labels,
            css_b.labels,
            k,
            row_labels=_pad_names(css_a.class_names, k),
            col_labels=_pad_names(css_b.class_names, k),
        )
        agreement = agreement_share(table)
        off_by = off_by_more_than_one(table)
        kappa = cohen_kappa(table)

    report = ConcordanceReport(
        source_a=focal_a.source_label,
        source_b=focal_b.source_label,
        level_a=config.level_a,
        level_b=config.level_b,
        min_cell_size=config.min_cell_size,
        css_iterations=config.css_iterations,
        confidence=config.confidence,
        n_focal_a=n_focal_a,
        n_focal_b=n_focal_b,
        n_filtered_a=len(focal_a),
        n_filtered_b=len(focal_b),
        n_reference_a=len(ref_a),
        n_reference_b=len(ref_b),
        n_matched=len(matched.pairs),
        n_ambiguous_a=len(matched.ambiguous_a),
        n_ambiguous_b=len(matched.ambiguous_b),
        n_unmatched_a=matched.unmatched_a,
        n_unmatched_b=matched.unmatched_b,
        n_scored=len(scored_values),
        dropped_undefined_a=dropped_a,
        dropped_undefined_b=dropped_b,
        dropped_undefined_both=dropped_both,
        pearson=r_p,
        spearman=r_s,
        ccc=ccc,
        ccc_band=interpret_ccc(ccc.point),
        means=means,
        regression=fit,
        css_a=css_a,
        css_b=css_b,
        table=table,
        agreement=agreement,
        off_by_more_than_one=off_by,
        kappa=kappa,
        kappa_band=interpret_kappa(kappa),
    )

    scored_pairs = [
        ScoredPair(record_id=rid, ncs_a=va, ncs_b=vb, class_a=la, class_b=lb)
        for (rid, va, vb), la, lb in zip(scored_values, css_a.labels, css_b.labels)
    ]

    with _stage("report"):
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / REPORT_NAME
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, indent=2, ensure_ascii=False)
            fh.write("\n")
        emit_plot_data(report, scored_pairs, out_dir)
    log.info("report written to %s", report_path)
    return report


def emit_plot_data(report: ConcordanceReport, scored: Sequence[ScoredPair], out_dir) -> None:
    """Write scatter.csv (per-pair scores and classes) and means.csv
    (series means with confidence bounds), RFC-4180 formatted."""
    out_dir = Path(out_dir)
    with open(out_dir / SCATTER_NAME, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "ncs_a", "ncs_b", "class_a", "class_b"])
        for pair in scored:
            writer.writerow(
                [pair.record_id, _fmt6(pair.ncs_a), _fmt6(pair.ncs_b), pair.class_a, pair.class_b]
            )
    with open(out_dir / MEANS_NAME, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "mean", "ci_lower", "ci_upper"])
        for name, ci in (("a", report.means.mean_x), ("b", report.means.mean_y), ("diff", report.means.diff)):
            writer.writerow([name, _fmt6(ci.point), _fmt6(ci.lower), _fmt6(ci.upper)])


def write_match_audit(a: Dataset, b: Dataset, matched: MatchedPairs, path) -> None:
    """Write one audit row per record involved in DOI matching:
    status,doi,record_id_a,record_id_b."""
    paired_a = {rec_a.record_id for rec_a, _ in matched.pairs}
    paired_b = {rec_b.record_id for _, rec_b in matched.pairs}
    ambiguous_a = set(matched.ambiguous_a)
    ambiguous_b = set(matched.ambiguous_b)
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["status", "doi", "record_id_a", "record_id_b"])
        for rec_a, rec_b in matched.pairs:
            writer.writerow(["matched", rec_a.doi, rec_a.record_id, rec_b.record_id])
        for rec in a.records:
            if rec.record_id in paired_a:
                continue
            if rec.doi is None:
                writer.writerow(["no_doi_a", "", rec.record_id, ""])
            elif rec.record_id in ambiguous_a:
                writer.writerow(["ambiguous_a", rec.doi, rec.record_id, ""])
            else:
                writer.writerow(["unmatched_a", rec.doi, rec.record_id, ""])
        for rec in b.records:
            if rec.record_id in paired_b:
                continue
            if rec.doi is None:
                writer.writerow(["no_doi_b", "", "", rec.record_id])
            elif rec.record_id in ambiguous_b:
                writer.writerow(["ambiguous_b", rec.doi, "", rec.record_id])
            else:
                writer.writerow(["unmatched_b", rec.doi, "", rec.record_id])
