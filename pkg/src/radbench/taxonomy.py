"""Demographic vocabularies: country -> region -> continent, and age binning."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import AgeOutOfRange, TaxonomyError, UnknownCountry

TAXONOMY_VERSION = "m49_v1"
MAX_AGE = 130


class LocationScope(enum.IntEnum):
    """Location sub-category, ordered by generality."""

    Country = 0
    Region = 1
    Continent = 2
    Global = 3


def normalize_country(code: str) -> str:
    return code.strip().upper()


@dataclass(frozen=True)
class LocationTaxonomy:
    entries: Mapping[str, tuple[str, str]]
    version: str = TAXONOMY_VERSION

    def __post_init__(self):
        region_to_continent: dict[str, str] = {}
        for code, (region, continent) in self.entries.items():
            if len(code) != 2 or not code.isalpha() or code != code.upper():
                raise TaxonomyError(f"bad country code {code!r}")
            seen = region_to_continent.setdefault(region, continent)
            if seen != continent:
                raise TaxonomyError(
                    f"region {region!r} spans continents {seen!r} and {continent!r}"
                )

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[str]], version: str = TAXONOMY_VERSION) -> "LocationTaxonomy":
        entries: dict[str, tuple[str, str]] = {}
        for country, region, continent in rows:
            code = normalize_country(country)
            if code in entries:
                raise TaxonomyError(f"country {code!r} listed twice")
            entries[code] = (region.strip(), continent.strip())
        return cls(entries=entries, version=version)

    @classmethod
    def from_csv(cls, text: str, version: str = TAXONOMY_VERSION) -> "LocationTaxonomy":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != ["country", "region", "continent"]:
            raise TaxonomyError(f"taxonomy header must be country,region,continent, got {header}")
        return cls.from_rows((r for r in reader if r), version=version)

    @classmethod
    def load(cls, path: str | Path) -> "LocationTaxonomy":
        path = Path(path)
        return cls.from_csv(path.read_text(encoding="utf-8"), version=path.stem)

    def __contains__(self, code: str) -> bool:
        return normalize_country(code) in self.entries

    def resolve(self, country: str) -> tuple[str, str]:
        try:
            return self.entries[normalize_country(country)]
        except KeyError:
            raise UnknownCountry(f"unknown country code {country!r}") from None

    def location_scopes(self, case_country: str, origin_country: str) -> frozenset[LocationScope]:
        case_region, case_continent = self.resolve(case_country)
        origin_region, origin_continent = self.resolve(origin_country)
        scopes = {LocationScope.Global}
        if case_continent == origin_continent:
            scopes.add(LocationScope.Continent)
            if case_region == origin_region:
                scopes.add(LocationScope.Region)
                if normalize_country(case_country) == normalize_country(origin_country):
                    scopes.add(LocationScope.Country)
        return frozenset(scopes)


@lru_cache(maxsize=1)
def default_taxonomy() -> LocationTaxonomy:
    text = resources.files("radbench.data").joinpath(f"{TAXONOMY_VERSION}.csv").read_text("utf-8")
    return LocationTaxonomy.from_csv(text, version=TAXONOMY_VERSION)


def resolve(country: str, taxonomy: LocationTaxonomy | None = None) -> tuple[str, str]:
    return (taxonomy or default_taxonomy()).resolve(country)


def location_scopes(
    case_country: str, origin_country: str, taxonomy: LocationTaxonomy | None = None
) -> frozenset[LocationScope]:
    """Scopes (relative to ``origin_country``) that a case from ``case_country`` falls in.

    The result is upward-closed: Country implies Region implies Continent,
    and Global is always present.
    """
    return (taxonomy or default_taxonomy()).location_scopes(case_country, origin_country)


@dataclass(frozen=True)
class AgeBinning:
    """Contiguous half-open ``[lo, hi)`` year intervals covering ``[0, 130)``."""

    bins: tuple[tuple[int, int], ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.bins) < 2:
            raise TaxonomyError("age binning needs at least 2 bins")
        if len(self.labels) != len(self.bins) or len(set(self.labels)) != len(self.labels):
            raise TaxonomyError("age binning needs one distinct label per bin")
        if self.bins[0][0] != 0 or self.bins[-1][1] != MAX_AGE:
            raise TaxonomyError(f"age bins must span [0, {MAX_AGE})")
        for lo, hi in self.bins:
            if not lo < hi:
                raise TaxonomyError(f"empty age bin [{lo}, {hi})")
        for (_, hi), (nlo, _) in zip(self.bins, self.bins[1:]):
            if nlo != hi:
                raise TaxonomyError(f"age bins not contiguous at {hi}")

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence]) -> "AgeBinning":
        """Build from ``(lo, hi, label)`` rows; an empty/None ``hi`` means open-topped."""
        bins, labels = [], []
        for lo, hi, label in rows:
            hi = MAX_AGE if hi in (None, "") else int(hi)
            bins.append((int(lo), hi))
            labels.append(str(label))
        return cls(tuple(bins), tuple(labels))

    @classmethod
    def from_csv(cls, text: str) -> "AgeBinning":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows and rows[0] == ["lo", "hi", "label"]:
            rows = rows[1:]
        return cls.from_rows(rows)

    def to_rows(self) -> list[list]:
        return [[lo, None if hi == MAX_AGE else hi, label] for (lo, hi), label in zip(self.bins, self.labels)]

    def group_of(self, age_years: int) -> str:
        if not 0 <= age_years < MAX_AGE:
            raise AgeOutOfRange(f"age {age_years} outside [0, {MAX_AGE})")
        for (lo, hi), label in zip(self.bins, self.labels):
            if lo <= age_years < hi:
                return label
        raise AgeOutOfRange(f"age {age_years} not covered")  # unreachable for a valid binning


def decade_binning() -> AgeBinning:
    rows = [(lo, lo + 10, f"{lo}-{lo + 9}") for lo in range(0, 80, 10)]
    rows.append((80, None, "80+"))
    return AgeBinning.from_rows(rows)


DEFAULT_AGE_BINNING = decade_binning()


def age_group_of(age_years: int, binning: AgeBinning = DEFAULT_AGE_BINNING) -> str:
    return binning.group_of(age_years)
