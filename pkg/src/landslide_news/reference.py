"""Country reference list and country-level indicators.

The reference is keyed by ISO-3 code. Indicator files are joined by code only;
countries without a value in some source fall back to ``Unknown`` (or ``0`` for
numeric measures) and are counted in the load summary.
"""

from __future__ import annotations

import configparser
import csv
import enum
import io
import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

ISO3_RE = re.compile(r"^[A-Z]{3}$")

SUBREGION_TO_CONTINENT: Mapping[str, str] = MappingProxyType({
    "Northern Africa": "Africa",
    "Sub-Saharan Africa": "Africa",
    "Latin America and the Caribbean": "Americas",
    "Northern America": "Americas",
    "Central Asia": "Asia",
    "Eastern Asia": "Asia",
    "South-eastern Asia": "Asia",
    "Southern Asia": "Asia",
    "Western Asia": "Asia",
    "Eastern Europe": "Europe",
    "Northern Europe": "Europe",
    "Southern Europe": "Europe",
    "Western Europe": "Europe",
    "Australia and New Zealand": "Oceania",
    "Melanesia": "Oceania",
    "Micronesia": "Oceania",
    "Polynesia": "Oceania",
})
SUBREGIONS = tuple(SUBREGION_TO_CONTINENT)
CONTINENTS = ("Africa", "Americas", "Asia", "Europe", "Oceania")


class Development(str, enum.Enum):
    GLOBAL_NORTH = "GlobalNorth"
    GLOBAL_SOUTH = "GlobalSouth"
    UNKNOWN = "Unknown"


class Income(str, enum.Enum):
    HIGH = "High"
    UPPER_MIDDLE = "UpperMiddle"
    LOWER_MIDDLE = "LowerMiddle"
    LOW = "Low"
    UNKNOWN = "Unknown"


class Risk(str, enum.Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"
    VERY_LOW = "VeryLow"
    UNKNOWN = "Unknown"


class RejectReason(str, enum.Enum):
    SPURIOUS = "Spurious"
    EXCLUDED = "Excluded"
    HOME = "Home"


@dataclass(frozen=True)
class Rejected:
    reason: RejectReason
    raw: str = ""


class ReferenceDataError(Exception):
    """Base class for problems with reference input files."""


class MissingFile(ReferenceDataError, FileNotFoundError):
    pass


class MalformedRow(ReferenceDataError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class DuplicateIso3(ReferenceDataError):
    def __init__(self, iso3: str, path=None):
        self.iso3 = iso3
        super().__init__(f"duplicate iso3 {iso3!r}" + (f" in {path}" if path else ""))


@dataclass(frozen=True)
class CountryRecord:
    iso3: str
    name: str
    subregion: str
    development: Development = Development.UNKNOWN
    income: Income = Income.UNKNOWN
    risk: Risk = Risk.UNKNOWN
    emdat_count: int = 0
    wbglhm_freq: float = 0.0
    analyzable: bool = True

    @property
    def continent(self) -> str:
        return SUBREGION_TO_CONTINENT[self.subregion]


@dataclass
class AdjustmentConfig:
    """Declarative additions, exclusions and aliases for the reference list."""

    home_country: str = "DEU"
    additions: dict[str, tuple[str, str]] = field(default_factory=dict)
    exclusions: dict[str, str] = field(default_factory=dict)
    aliases: dict[str, str] = field(default_factory=dict)
    expected_size: int | None = None

    @classmethod
    def from_file(cls, path) -> "AdjustmentConfig":
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"adjustment file not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"), source=str(path))

    @classmethod
    def from_text(cls, text: str, source: str = "<adjustments>") -> "AdjustmentConfig":
        parser = configparser.ConfigParser(allow_no_value=True, interpolation=None,
                                           delimiters=("=",), inline_comment_prefixes=None)
        parser.optionxform = str  # keep key case
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ReferenceDataError(f"{source}: {exc}") from exc
        cfg = cls()
        if parser.has_section("reference"):
            sec = parser["reference"]
            cfg.home_country = (sec.get("home_country") or cfg.home_country).strip().upper()
            size = sec.get("expected_size")
            if size:
                cfg.expected_size = int(size)
        if parser.has_section("additions"):
            for code, value in parser["additions"].items():
                name, _, subregion = (value or "").partition("|")
                cfg.additions[code.strip().upper()] = (name.strip() or code.strip().upper(),
                                                       subregion.strip())
        if parser.has_section("exclusions"):
            for code, value in parser["exclusions"].items():
                cfg.exclusions[code.strip().upper()] = (value or "").strip()
        if parser.has_section("aliases"):
            for raw, code in parser["aliases"].items():
                if not code:
                    raise ReferenceDataError(f"{source}: alias {raw!r} has no target")
                cfg.aliases[raw.strip()] = code.strip().upper()
        return cfg

    @classmethod
    def default(cls) -> "AdjustmentConfig":
        text = resources.files("landslide_news.data").joinpath("adjustments.ini").read_text("utf-8")
        return cls.from_text(text, source="adjustments.ini")


@dataclass(frozen=True)
class CountryReference:
    records: Mapping[str, CountryRecord]
    excluded: frozenset[str]
    alias_map: Mapping[str, str]
    home_country: str = "DEU"
    emdat_by_year: Mapping[str, Mapping[int, int]] | None = None
    summary: tuple[dict, ...] = ()

    def __post_init__(self):
        overlap = set(self.records) & self.excluded
        if overlap:
            raise ReferenceDataError(f"records and exclusions overlap: {sorted(overlap)}")

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, iso3) -> bool:
        return iso3 in self.records

    def __getitem__(self, iso3: str) -> CountryRecord:
        return self.records[iso3]

    def analyzable(self) -> list[CountryRecord]:
        """Records eligible for analysis, sorted by iso3."""
        return [r for _, r in sorted(self.records.items()) if r.analyzable]

    def normalize(self, raw) -> str | Rejected:
        return normalize_country_code(raw, self)

    def summary_jsonl(self) -> str:
        return "".join(json.dumps(s, sort_keys=True) + "\n" for s in self.summary)


def normalize_country_code(raw, ref: CountryReference) -> str | Rejected:
    """Map a raw code or alias to its canonical iso3, or say why it is rejected.

    Lookup is case-insensitive. Exclusions win over aliases that point at an
    excluded code; the home country is recognised after alias resolution.
    """
    if not isinstance(raw, str):
        return Rejected(RejectReason.SPURIOUS, repr(raw))
    key = raw.strip()
    upper = key.upper()
    if upper in ref.records:
        code = upper
    elif upper in ref.excluded:
        return Rejected(RejectReason.EXCLUDED, raw)
    else:
        code = ref.alias_map.get(key.casefold())
        if code is None:
            return Rejected(RejectReason.SPURIOUS, raw)
        if code in ref.excluded:
            return Rejected(RejectReason.EXCLUDED, raw)
    if code == ref.home_country or not ref.records[code].analyzable:
        return Rejected(RejectReason.HOME, raw)
    return code


# -- file reading -------------------------------------------------------------

_ISO3_COLUMNS = ("iso3", "iso", "iso_code", "iso-alpha3 code", "iso3_code", "country_code", "code")
_VALUE_COLUMNS = {
    "country": ("name", "country", "country or area", "country_name"),
    "subregion": ("subregion", "sub-region name", "sub_region"),
    "emdat": ("count", "events", "n", "emdat_count"),
    "wbglhm": ("frequency", "freq", "wbglhm_freq", "value", "annual_frequency"),
    "risk": ("risk", "hazard", "level", "ls_risk"),
    "development": ("development", "status", "development_status"),
    "income": ("income", "income_group", "income group", "group"),
}
INDICATOR_SOURCES = ("emdat", "wbglhm", "risk", "development", "income")

_RISK_VALUES = {
    "high": Risk.HIGH, "medium": Risk.MEDIUM, "low": Risk.LOW,
    "very low": Risk.VERY_LOW, "verylow": Risk.VERY_LOW, "very_low": Risk.VERY_LOW,
    "unknown": Risk.UNKNOWN, "": Risk.UNKNOWN, "no data": Risk.UNKNOWN,
}
_DEVELOPMENT_VALUES = {
    "developed": Development.GLOBAL_NORTH, "globalnorth": Development.GLOBAL_NORTH,
    "global north": Development.GLOBAL_NORTH, "north": Development.GLOBAL_NORTH,
    "developing": Development.GLOBAL_SOUTH, "globalsouth": Development.GLOBAL_SOUTH,
    "global south": Development.GLOBAL_SOUTH, "south": Development.GLOBAL_SOUTH,
    "unknown": Development.UNKNOWN, "": Development.UNKNOWN,
}
_INCOME_VALUES = {
    "high": Income.HIGH, "high income": Income.HIGH, "h": Income.HIGH,
    "upper middle": Income.UPPER_MIDDLE, "upper middle income": Income.UPPER_MIDDLE,
    "uppermiddle": Income.UPPER_MIDDLE, "um": Income.UPPER_MIDDLE,
    "lower middle": Income.LOWER_MIDDLE, "lower middle income": Income.LOWER_MIDDLE,
    "lowermiddle": Income.LOWER_MIDDLE, "lm": Income.LOWER_MIDDLE,
    "low": Income.LOW, "low income": Income.LOW, "l": Income.LOW,
    "unknown": Income.UNKNOWN, "": Income.UNKNOWN,
}


def _read_table(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Read a delimited file with a header row; returns (header, [(line, row)])."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"file not found: {path}")
    text = path.read_text(encoding="utf-8-sig")
    if not text.strip():
        return [], []
    first = text.splitlines()[0]
    delimiter = max(",\t;", key=first.count)
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    header = [h.strip().casefold() for h in next(reader)]
    rows = []
    for row in reader:
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(path, reader.line_num,
                               f"expected {len(header)} fields, got {len(row)}")
        rows.append((reader.line_num, [cell.strip() for cell in row]))
    return header, rows


def _column(header: list[str], candidates: Iterable[str], path, required=True) -> int | None:
    for name in candidates:
        if name in header:
            return header.index(name)
    if required:
        raise MalformedRow(path, 1, f"none of the columns {list(candidates)} in header {header}")
    return None


def _iso3(value: str, path, line: int) -> str:
    code = value.strip().upper()
    if not ISO3_RE.match(code):
        raise MalformedRow(path, line, f"invalid iso3 code {value!r}")
    return code


def _lookup(table: dict, value: str, path, line: int, what: str):
    key = " ".join(value.replace("-", " ").split()).casefold()
    if key in table:
        return table[key]
    if key.replace(" ", "") in table:
        return table[key.replace(" ", "")]
    raise MalformedRow(path, line, f"unknown {what} value {value!r}")


def read_countries(path) -> list[tuple[int, str, str, str]]:
    """Rows of (line, iso3, name, subregion) from a UNSD-style country list."""
    header, rows = _read_table(path)
    if not header:
        raise MalformedRow(path, 1, "empty country file")
    ci = _column(header, _ISO3_COLUMNS, path)
    ni = _column(header, _VALUE_COLUMNS["country"], path)
    si = _column(header, _VALUE_COLUMNS["subregion"], path)
    out = []
    for line, row in rows:
        out.append((line, row[ci].upper(), row[ni], row[si]))
    return out


def _read_indicator(source: str, path, period_years: tuple[int, int] | None):
    """Return ({iso3: value}, rows_read, {iso3: {year: count}} or None)."""
    header, rows = _read_table(path)
    if not header:
        return {}, 0, None
    ci = _column(header, _ISO3_COLUMNS, path)
    values: dict = {}
    by_year = None
    if source == "emdat":
        yi = _column(header, ("year", "start_year", "start year"), path, required=False)
        ni = _column(header, _VALUE_COLUMNS["emdat"], path, required=yi is None)
        if yi is not None:
            by_year = defaultdict(Counter)
        seen = set()
        for line, row in rows:
            code = _iso3(row[ci], path, line)
            n = _int(row[ni], path, line) if ni is not None else 1
            if yi is None:
                if code in seen:
                    raise DuplicateIso3(code, path)
                seen.add(code)
                values[code] = n
                continue
            year = _int(row[yi], path, line)
            if period_years and not period_years[0] <= year <= period_years[1]:
                continue
            by_year[code][year] += n
            values[code] = values.get(code, 0) + n
        if by_year is not None:
            by_year = {k: dict(sorted(v.items())) for k, v in by_year.items()}
        return values, len(rows), by_year

    vi = _column(header, _VALUE_COLUMNS[source], path)
    for line, row in rows:
        code = _iso3(row[ci], path, line)
        if code in values:
            raise DuplicateIso3(code, path)
        raw = row[vi]
        if source == "wbglhm":
            try:
                value = float(raw) if raw else 0.0
            except ValueError:
                raise MalformedRow(path, line, f"not a number: {raw!r}") from None
            if not value >= 0:
                raise MalformedRow(path, line, f"negative or NaN frequency {raw!r}")
        elif source == "risk":
            value = _lookup(_RISK_VALUES, raw, path, line, "risk")
        elif source == "development":
            value = _lookup(_DEVELOPMENT_VALUES, raw, path, line, "development")
        else:
            value = _lookup(_INCOME_VALUES, raw, path, line, "income")
        values[code] = value
    return values, len(rows), None


def _int(raw: str, path, line: int) -> int:
    try:
        value = int(float(raw)) if raw else 0
    except ValueError:
        raise MalformedRow(path, line, f"not an integer: {raw!r}") from None
    if value < 0:
        raise MalformedRow(path, line, f"negative count {raw!r}")
    return value


_FIELD_FOR_SOURCE = {
    "emdat": ("emdat_count", 0),
    "wbglhm": ("wbglhm_freq", 0.0),
    "risk": ("risk", Risk.UNKNOWN),
    "development": ("development", Development.UNKNOWN),
    "income": ("income", Income.UNKNOWN),
}


def load_country_reference(
    country_file,
    indicator_files: Mapping[str, object] | None = None,
    adjustments: AdjustmentConfig | None = None,
    *,
    home_country: str | None = None,
    period_years: tuple[int, int] | None = (2000, 2024),
) -> CountryReference:
    """Build the keyed country table from the country list and indicator files.

    ``indicator_files`` maps a source name (``emdat``, ``wbglhm``, ``risk``,
    ``development``, ``income``) to a path; absent sources default every record
    to Unknown/0. An EM-DAT file with a ``year`` column is read as dated
    records and restricted to ``period_years``.
    """
    adjustments = adjustments or AdjustmentConfig.default()
    home = (home_country or adjustments.home_country).upper()
    indicator_files = dict(indicator_files or {})
    unknown_sources = set(indicator_files) - set(INDICATOR_SOURCES)
    if unknown_sources:
        raise ReferenceDataError(f"unknown indicator sources: {sorted(unknown_sources)}")

    base: dict[str, dict] = {}
    excluded: set[str] = set()
    rows = read_countries(country_file)
    for line, code, name, subregion in rows:
        if not ISO3_RE.match(code):
            raise MalformedRow(country_file, line, f"invalid iso3 code {code!r}")
        if code in base or code in excluded:
            raise DuplicateIso3(code, country_file)
        if code in adjustments.exclusions:
            excluded.add(code)
            continue
        if subregion not in SUBREGION_TO_CONTINENT:
            raise MalformedRow(country_file, line, f"unknown subregion {subregion!r}")
        base[code] = {"iso3": code, "name": name, "subregion": subregion}
    for code, (name, subregion) in adjustments.additions.items():
        if code in base or code in adjustments.exclusions:
            continue
        if subregion not in SUBREGION_TO_CONTINENT:
            raise ReferenceDataError(f"addition {code}: unknown subregion {subregion!r}")
        base[code] = {"iso3": code, "name": name, "subregion": subregion}
    excluded |= set(adjustments.exclusions)

    summary = [{"source": "countries", "rows_read": len(rows),
                "rows_joined": len(base), "rows_unknown": 0}]
    emdat_by_year = None
    for source in INDICATOR_SOURCES:
        attr, default = _FIELD_FOR_SOURCE[source]
        path = indicator_files.get(source)
        values, n_read, by_year = ({}, 0, None) if path is None else _read_indicator(
            source, path, period_years)
        if source == "emdat" and by_year is not None:
            emdat_by_year = {k: MappingProxyType(v) for k, v in sorted(by_year.items())
                             if k in base}
        joined = 0
        for code, rec in base.items():
            if code in values:
                rec[attr] = values[code]
                joined += 1
            else:
                rec[attr] = default
        summary.append({"source": source, "rows_read": n_read, "rows_joined": joined,
                        "rows_unknown": len(base) - joined})

    records = {code: CountryRecord(analyzable=(code != home), **fields)
               for code, fields in sorted(base.items())}

    alias_map: dict[str, str] = {}
    for code, rec in records.items():
        alias_map[rec.name.casefold()] = code
    for raw, code in adjustments.aliases.items():
        if code not in records and code not in excluded:
            raise ReferenceDataError(f"alias {raw!r} points at unknown code {code!r}")
        alias_map[raw.casefold()] = code

    if adjustments.expected_size is not None and len(records) != adjustments.expected_size:
        raise ReferenceDataError(
            f"reference has {len(records)} records, expected {adjustments.expected_size}")

    return CountryReference(
        records=MappingProxyType(records),
        excluded=frozenset(excluded),
        alias_map=MappingProxyType(alias_map),
        home_country=home,
        emdat_by_year=MappingProxyType(emdat_by_year) if emdat_by_year is not None else None,
        summary=tuple(summary),
    )


def bundled_country_file() -> Path:
    """Path to the bundled UNSD M49 country list (248 rows)."""
    return Path(str(resources.files("landslide_news.data").joinpath("unsd_m49.csv")))
