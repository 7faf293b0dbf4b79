"""Core domain types for two-person DNA mixture analysis.

All values are immutable after construction and safe to share across
threads. Relative peak sizes are renormalized on construction so that
they sum to one per marker; frequency tables tolerate the small rounding
found in published tables and are renormalized as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data (files, tables, profiles)."""


class NumericError(RuntimeError):
    """A numerical routine failed (non-convergence, infeasible likelihood)."""


def allele_sort_key(label: str):
    """Sort key for allele labels: numeric when parseable, else lexicographic.

    STR allele designations are numeric-ish strings ("14", "9.3", "25.2");
    sorting them numerically keeps genotype output in conventional order.
    """
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


@dataclass(frozen=True, order=True)
class Allele:
    """One allele designation at one marker; (marker, label) is the unique key."""

    marker: str
    label: str

    def __post_init__(self):
        if not self.label or not self.marker:
            raise DataError("allele marker and label must be non-empty")


class Genotype:
    """Unordered pair of allele labels at one marker; homozygote repeats the label."""

    __slots__ = ("alleles",)

    def __init__(self, a: str, b: str):
        a, b = str(a), str(b)
        if not a or not b:
            raise DataError("allele labels must be non-empty")
        if allele_sort_key(b) < allele_sort_key(a):
            a, b = b, a
        self.alleles = (a, b)

    @property
    def is_homozygous(self) -> bool:
        return self.alleles[0] == self.alleles[1]

    def count(self, label: str) -> int:
        """Number of copies of `label` carried (0, 1 or 2)."""
        return (self.alleles[0] == label) + (self.alleles[1] == label)

    def support(self) -> frozenset[str]:
        return frozenset(self.alleles)

    def __eq__(self, other) -> bool:
        return isinstance(other, Genotype) and self.alleles == other.alleles

    def __lt__(self, other: "Genotype") -> bool:
        return tuple(map(allele_sort_key, self.alleles)) < tuple(
            map(allele_sort_key, other.alleles)
        )

    def __hash__(self) -> int:
        return hash(self.alleles)

    def __repr__(self) -> str:
        return f"Genotype({self.alleles[0]!r}, {self.alleles[1]!r})"

    def __str__(self) -> str:
        return f"{self.alleles[0]}/{self.alleles[1]}"


class Profile:
    """A DNA profile: mapping from marker to genotype."""

    __slots__ = ("genotypes",)

    def __init__(self, genotypes: Mapping[str, Genotype]):
        self.genotypes = dict(genotypes)

    def genotype(self, marker: str) -> Genotype:
        try:
            return self.genotypes[marker]
        except KeyError:
            raise DataError(f"profile has no genotype for marker {marker!r}") from None

    def markers(self) -> set[str]:
        return set(self.genotypes)

    def __eq__(self, other) -> bool:
        return isinstance(other, Profile) and self.genotypes == other.genotypes

    def __repr__(self) -> str:
        inner = ", ".join(f"{m}: {g}" for m, g in sorted(self.genotypes.items()))
        return f"Profile({{{inner}}})"


@dataclass(frozen=True)
class MarkerData:
    """Observed alleles and relative peak sizes at one marker.

    Sizes must be strictly positive; they are normalized to sum to one on
    construction (published tables round to four decimals, so rows rarely
    sum to one exactly).
    """

    marker: str
    alleles: tuple[str, ...]
    rel_sizes: np.ndarray

    def __post_init__(self):
        alleles = tuple(str(a) for a in self.alleles)
        sizes = np.asarray(self.rel_sizes, dtype=float)
        if sizes.ndim != 1 or sizes.size != len(alleles):
            raise DataError(
                f"marker {self.marker!r}: need one size per allele "
                f"({len(alleles)} alleles, {sizes.size} sizes)"
            )
        if len(set(alleles)) != len(alleles):
            raise DataError(f"marker {self.marker!r}: duplicate allele labels")
        if sizes.size == 0:
            raise DataError(f"marker {self.marker!r}: no alleles")
        if np.any(sizes <= 0) or not np.all(np.isfinite(sizes)):
            raise DataError(f"marker {self.marker!r}: peak sizes must be positive")
        sizes = sizes / sizes.sum()
        sizes.flags.writeable = False
        object.__setattr__(self, "alleles", alleles)
        object.__setattr__(self, "rel_sizes", sizes)

    @property
    def allele_set(self) -> frozenset[str]:
        return frozenset(self.alleles)


@dataclass(frozen=True)
class MixtureDataset:
    """Per-marker observations for one mixed trace.

    Real case files carry at least two markers (enforced at ingest); the
    in-memory type also accepts smaller sets so that diagnostics such as
    prior-recovery runs can use degenerate datasets.
    """

    markers: tuple[MarkerData, ...]

    def __post_init__(self):
        markers = tuple(self.markers)
        ids = [m.marker for m in markers]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate marker ids in dataset")
        object.__setattr__(self, "markers", markers)

    def marker_ids(self) -> tuple[str, ...]:
        return tuple(m.marker for m in self.markers)

    def alleles(self) -> tuple[Allele, ...]:
        return tuple(
            Allele(md.marker, label) for md in self.markers for label in md.alleles
        )

    def by_marker(self, marker: str) -> MarkerData:
        for m in self.markers:
            if m.marker == marker:
                return m
        raise DataError(f"dataset has no marker {marker!r}")

    def __len__(self) -> int:
        return len(self.markers)


class FrequencyTable:
    """Population allele frequencies per marker.

    Frequencies must be positive; per-marker sums within 2% of one are
    renormalized (published tables are rounded), larger deviations are
    rejected as malformed.
    """

    __slots__ = ("freqs",)

    def __init__(self, freqs: Mapping[str, Mapping[str, float]]):
        table: dict[str, dict[str, float]] = {}
        for marker, fm in freqs.items():
            if not fm:
                raise DataError(f"marker {marker!r}: empty frequency map")
            vals = {str(a): float(q) for a, q in fm.items()}
            if any(q <= 0 or not math.isfinite(q) for q in vals.values()):
                raise DataError(f"marker {marker!r}: frequencies must be positive")
            total = sum(vals.values())
            if abs(total - 1.0) > 0.02:
                raise DataError(
                    f"marker {marker!r}: frequencies sum to {total:.4f}, not 1"
                )
            table[str(marker)] = {a: q / total for a, q in vals.items()}
        self.freqs = table

    def freq(self, marker: str, label: str) -> float:
        try:
            fm = self.freqs[marker]
        except KeyError:
            raise DataError(f"no frequencies for marker {marker!r}") from None
        try:
            return fm[label]
        except KeyError:
            raise DataError(
                f"no frequency for allele {label!r} at marker {marker!r}"
            ) from None

    def log_freq(self, marker: str, label: str) -> float:
        return math.log(self.freq(marker, label))

    def markers(self) -> set[str]:
        return set(self.freqs)

    def alleles(self, marker: str) -> tuple[str, ...]:
        try:
            fm = self.freqs[marker]
        except KeyError:
            raise DataError(f"no frequencies for marker {marker!r}") from None
        return tuple(sorted(fm, key=allele_sort_key))

    def __eq__(self, other) -> bool:
        return isinstance(other, FrequencyTable) and self.freqs == other.freqs


@dataclass(frozen=True)
class ModelParams:
    """Continuous unknowns: mixture proportion of contributor 1 and peak imbalance."""

    theta: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")

    @property
    def beta(self) -> float:
        return 1.0 / (self.sigma * self.sigma) - 1.0


@dataclass(frozen=True)
class Hypothesis:
    """Which contributors are fixed to known profiles.

    Contributor 1 is always the one carrying mixture proportion theta. An
    unfixed slot means a random member of the population under
    Hardy-Weinberg equilibrium.
    """

    known1: Optional[Profile] = None
    known2: Optional[Profile] = None

    @property
    def n_unknown(self) -> int:
        return (self.known1 is None) + (self.known2 is None)

    @property
    def both_unknown(self) -> bool:
        return self.known1 is None and self.known2 is None


BOTH_UNKNOWN = Hypothesis()


@dataclass(frozen=True)
class MeanFractions:
    """Expected relative peak size per allele at one marker."""

    mu: Mapping[str, float]

    def __post_init__(self):
        total = sum(self.mu.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mean fractions sum to {total!r}, not 1")

    def as_arrays(self) -> tuple[tuple[str, ...], np.ndarray]:
        labels = tuple(sorted(self.mu, key=allele_sort_key))
        return labels, np.array([self.mu[a] for a in labels])


@dataclass(frozen=True)
class GenotypeConfig:
    """One ordered genotype pair (contributor 1, contributor 2) per marker."""

    markers: tuple[str, ...]
    pairs: tuple[tuple[Genotype, Genotype], ...]

    def __post_init__(self):
        if len(self.markers) != len(self.pairs):
            raise DataError("one genotype pair per marker required")
        object.__setattr__(self, "markers", tuple(self.markers))
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))

    @classmethod
    def from_profiles(cls, markers: Iterable[str], p1: Profile, p2: Profile) -> "GenotypeConfig":
        markers = tuple(markers)
        return cls(markers, tuple((p1.genotype(m), p2.genotype(m)) for m in markers))

    def pair(self, marker: str) -> tuple[Genotype, Genotype]:
        try:
            return self.pairs[self.markers.index(marker)]
        except ValueError:
            raise DataError(f"config has no marker {marker!r}") from None

    def profiles(self) -> tuple[Profile, Profile]:
        return (
            Profile({m: p[0] for m, p in zip(self.markers, self.pairs)}),
            Profile({m: p[1] for m, p in zip(self.markers, self.pairs)}),
        )

    def __str__(self) -> str:
        return "; ".join(
            f"{m}:{p[0]}|{p[1]}" for m, p in zip(self.markers, self.pairs)
        )
