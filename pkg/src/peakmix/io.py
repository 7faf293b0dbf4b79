"""CSV/JSON ingestion and report emission.

File shapes:
  peaks        marker,allele,area   (raw areas, normalized per marker)
               marker,allele,rel    (relative sizes, renormalized)
  frequencies  marker,allele,freq
  profile      marker,allele1,allele2

Lines starting with '#' are comments; report CSVs carry the resolved run
configuration in one leading comment line for audit reproducibility.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .types import (
    DataError,
    FrequencyTable,
    Genotype,
    MarkerData,
    MixtureDataset,
    Profile,
)


def _rows(path: Path):
    with open(path, newline="") as fh:
        header = None
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            row = [c.strip() for c in row]
            if header is None:
                header = row
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, dict(zip(header, row))
    if header is None:
        raise DataError(f"{path}: empty file")


def _parse_positive(value: str, path: Path, lineno: int, what: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise DataError(f"{path}:{lineno}: {what} {value!r} is not a number") from None
    if not math.isfinite(x) or x <= 0:
        raise DataError(f"{path}:{lineno}: {what} must be positive, got {value!r}")
    return x


def read_peaks(
    path: str | Path,
    repeat_correction: bool = False,
    repeat_numbers: Mapping[str, float] | None = None,
    min_markers: int = 2,
) -> MixtureDataset:
    """Read a peak table (area or rel column) into a normalized dataset.

    With repeat_correction, each raw size is divided by its allele's repeat
    number (taken from `repeat_numbers` or parsed from the allele label)
    before per-marker normalization.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"peak file not found: {path}")
    per_marker: dict[str, list[tuple[str, float]]] = {}
    size_col = None
    for lineno, row in _rows(path):
        if size_col is None:
            for cand in ("area", "rel"):
                if cand in row:
                    size_col = cand
            if size_col is None:
                raise DataError(f"{path}: header must contain an 'area' or 'rel' column")
        try:
            marker, allele = row["marker"], row["allele"]
        except KeyError as missing:
            raise DataError(f"{path}: header is missing the {missing} column") from None
        size = _parse_positive(row[size_col], path, lineno, size_col)
        if repeat_correction:
            if repeat_numbers is not None and allele in repeat_numbers:
                rep = float(repeat_numbers[allele])
            else:
                try:
                    rep = float(allele)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: no repeat number for allele {allele!r}"
                    ) from None
            if rep <= 0:
                raise DataError(f"{path}:{lineno}: repeat number must be positive")
            size /= rep
        seen = per_marker.setdefault(marker, [])
        if any(a == allele for a, _ in seen):
            raise DataError(f"{path}:{lineno}: duplicate row for ({marker}, {allele})")
        seen.append((allele, size))
    markers = tuple(
        MarkerData(m, tuple(a for a, _ in v), np.array([s for _, s in v]))
        for m, v in per_marker.items()
    )
    if len(markers) < min_markers:
        raise DataError(f"{path}: need at least {min_markers} markers, found {len(markers)}")
    return MixtureDataset(markers)


def write_peaks(ds: MixtureDataset, path: str | Path, comment: str | None = None):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["marker", "allele", "rel"])
        for md in ds.markers:
            for allele, rel in zip(md.alleles, md.rel_sizes):
                w.writerow([md.marker, allele, repr(float(rel))])


def read_frequencies(path: str | Path) -> FrequencyTable:
    path = Path(path)
    if not path.exists():
        raise DataError(f"frequency file not found: {path}")
    table: dict[str, dict[str, float]] = {}
    for lineno, row in _rows(path):
        try:
            marker, allele, freq = row["marker"], row["allele"], row["freq"]
        except KeyError as missing:
            raise DataError(f"{path}: header is missing the {missing} column") from None
        fm = table.setdefault(marker, {})
        if allele in fm:
            raise DataError(f"{path}:{lineno}: duplicate row for ({marker}, {allele})")
        fm[allele] = _parse_positive(freq, path, lineno, "freq")
    return FrequencyTable(table)


def write_frequencies(freqs: FrequencyTable, path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["marker", "allele", "freq"])
        for marker in sorted(freqs.freqs):
            for allele in freqs.alleles(marker):
                w.writerow([marker, allele, repr(freqs.freq(marker, allele))])


def read_repeat_numbers(path: str | Path) -> dict[str, float]:
    """Read an allele -> repeat number map (CSV columns allele,repeat)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"repeat-number file not found: {path}")
    repeats: dict[str, float] = {}
    for lineno, row in _rows(path):
        try:
            repeats[row["allele"]] = _parse_positive(row["repeat"], path, lineno, "repeat")
        except KeyError as missing:
            raise DataError(f"{path}: header is missing the {missing} column") from None
    return repeats


def read_profile(path: str | Path) -> Profile:
    path = Path(path)
    if not path.exists():
        raise DataError(f"profile file not found: {path}")
    genotypes: dict[str, Genotype] = {}
    for lineno, row in _rows(path):
        try:
            marker = row["marker"]
            g = Genotype(row["allele1"], row["allele2"])
        except KeyError as missing:
            raise DataError(f"{path}: header is missing the {missing} column") from None
        if marker in genotypes:
            raise DataError(f"{path}:{lineno}: duplicate marker {marker!r}")
        genotypes[marker] = g
    return Profile(genotypes)


def write_json_report(payload: dict, path: str | Path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_bootstrap_csv(report, path: str | Path, comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["replicate", "sigma_hat", "theta_hat", "log10_lr"])
        for i, (s, t, lr) in enumerate(
            zip(report.sigma_hat, report.theta_hat, report.log10_lr)
        ):
            w.writerow([i, repr(float(s)), repr(float(t)), repr(float(lr))])


def write_trace_csv(samples, path: str | Path, comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["iteration", "sigma", "theta"])
        for i, (s, t) in enumerate(zip(samples.sigma, samples.theta)):
            w.writerow([i, repr(float(s)), repr(float(t))])


def write_deconvolution_csv(ranked, path: str | Path, comment: str | None = None):
    """Ranked list with one genotype column per (contributor, marker)."""
    markers: Sequence[str] = ranked.entries[0].config.markers if ranked.entries else ()
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        header = (
            ["rank", "probability", "certified"]
            + [f"c1_{m}" for m in markers]
            + [f"c2_{m}" for m in markers]
        )
        w.writerow(header)
        for rank, entry in enumerate(ranked.entries, start=1):
            row = [rank, repr(entry.probability), int(rank <= ranked.certified_k)]
            row += [str(p[0]) for p in entry.config.pairs]
            row += [str(p[1]) for p in entry.config.pairs]
            w.writerow(row)
