"""Daily count series per country and their segmentation into news events."""

from __future__ import annotations

import bisect
import csv
import datetime as dt
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import DEFAULT_PERIOD, DataInstance

DEFAULT_MAX_GAP = 4

EVENT_COLUMNS = (
    "iso3", "first_day", "last_day", "peak_day", "n_at_peak", "total_volume",
    "duration_days", "days_since_last", "days_to_peak", "days_to_fade",
    "n_text_types", "n_outlets",
)


class OutOfPeriodInstance(ValueError):
    pass


def period_length(period: tuple[dt.date, dt.date]) -> int:
    start, end = period
    if end < start:
        raise ValueError(f"period ends before it starts: {start}..{end}")
    return (end - start).days + 1


@dataclass(frozen=True)
class CountSeries:
    iso3: str
    period_start: dt.date
    period_end: dt.date
    counts: np.ndarray

    def __post_init__(self):
        if len(self.counts) != period_length((self.period_start, self.period_end)):
            raise ValueError("counts length does not match period")

    def day(self, index: int) -> dt.date:
        return self.period_start + dt.timedelta(days=int(index))

    def index(self, day: dt.date) -> int:
        return (day - self.period_start).days

    @property
    def active_days(self) -> int:
        return int(np.count_nonzero(self.counts))


@dataclass(frozen=True)
class EventMeasures:
    n_at_peak: int
    total_volume: int
    duration_days: int
    days_since_last: int | None
    days_to_peak: int
    days_to_fade: int
    n_text_types: int
    n_outlets: int


@dataclass(frozen=True)
class NewsEvent:
    iso3: str
    first_day: dt.date
    last_day: dt.date
    peak_day: dt.date
    measures: EventMeasures | None = None

    def row(self) -> list:
        m = self.measures
        if m is None:
            raise ValueError("event has no measures")
        return [self.iso3, self.first_day.isoformat(), self.last_day.isoformat(),
                self.peak_day.isoformat(), m.n_at_peak, m.total_volume, m.duration_days,
                "" if m.days_since_last is None else m.days_since_last, m.days_to_peak,
                m.days_to_fade, m.n_text_types, m.n_outlets]


def build_series(instances: Iterable[DataInstance],
                 period: tuple[dt.date, dt.date] = DEFAULT_PERIOD) -> dict[str, CountSeries]:
    """Daily instance counts per country; countries without instances are absent."""
    start, end = period
    n = period_length(period)
    days: dict[str, list[int]] = defaultdict(list)
    for inst in instances:
        idx = (inst.date - start).days
        if not 0 <= idx < n:
            raise OutOfPeriodInstance(f"{inst.doc_id}/{inst.iso3} dated {inst.date} "
                                      f"outside {start}..{end}")
        days[inst.iso3].append(idx)
    return {iso3: CountSeries(iso3, start, end,
                              np.bincount(np.asarray(idx, dtype=np.int64), minlength=n))
            for iso3, idx in sorted(days.items())}


def _spans(counts: np.ndarray, max_gap: int) -> list[tuple[int, int]]:
    active = np.flatnonzero(counts)
    if active.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(active) - 1 > max_gap)
    firsts = active[np.concatenate(([0], breaks + 1))]
    lasts = active[np.concatenate((breaks, [active.size - 1]))]
    return list(zip(firsts.tolist(), lasts.tolist()))


def segment(series: CountSeries, max_gap: int = DEFAULT_MAX_GAP) -> list[NewsEvent]:
    """Split a series into events; ``max_gap + 1`` inactive days in a row split."""
    if max_gap < 0:
        raise ValueError("max_gap must be >= 0")
    events = []
    for first, last in _spans(series.counts, max_gap):
        peak = first + int(np.argmax(series.counts[first:last + 1]))
        events.append(NewsEvent(series.iso3, series.day(first), series.day(last),
                                series.day(peak)))
    return events


def event_measures(event: NewsEvent, series: CountSeries,
                   instances: Sequence[DataInstance],
                   previous_event: NewsEvent | None = None) -> EventMeasures:
    """Measure vector for one event.

    ``instances`` are the country's instances; only those dated inside the
    event contribute to the outlet and text-type counts.
    """
    first, last = series.index(event.first_day), series.index(event.last_day)
    window = series.counts[first:last + 1]
    peak = first + int(np.argmax(window))
    outlets, types = set(), set()
    for inst in instances:
        if event.first_day <= inst.date <= event.last_day:
            outlets.add(inst.outlet)
            if inst.text_type:
                types.add(inst.text_type)
    return EventMeasures(
        n_at_peak=int(window.max()),
        total_volume=int(window.sum()),
        duration_days=last - first + 1,
        days_since_last=(None if previous_event is None
                         else (event.first_day - previous_event.last_day).days),
        days_to_peak=peak - first,
        days_to_fade=last - peak,
        n_text_types=len(types),
        n_outlets=len(outlets),
    )


def _country_events(series: CountSeries, instances: list[DataInstance],
                    max_gap: int) -> list[NewsEvent]:
    instances = sorted(instances, key=lambda i: i.date)
    dates = [i.date for i in instances]
    out = []
    previous = None
    for ev in segment(series, max_gap):
        lo = bisect.bisect_left(dates, ev.first_day)
        hi = bisect.bisect_right(dates, ev.last_day)
        ev = replace(ev, measures=event_measures(ev, series, instances[lo:hi], previous))
        out.append(ev)
        previous = ev
    return out


def detect_events(instances: Iterable[DataInstance],
                  period: tuple[dt.date, dt.date] = DEFAULT_PERIOD,
                  max_gap: int = DEFAULT_MAX_GAP,
                  jobs: int = 1,
                  series: Mapping[str, CountSeries] | None = None) -> list[NewsEvent]:
    """Build, segment and measure all countries; events sorted by (iso3, first_day)."""
    instances = list(instances)
    if series is None:
        series = build_series(instances, period)
    by_country: dict[str, list[DataInstance]] = defaultdict(list)
    for inst in instances:
        by_country[inst.iso3].append(inst)
    codes = sorted(series)
    args = [(series[c], by_country[c], max_gap) for c in codes]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda a: _country_events(*a), args))
    else:
        parts = [_country_events(*a) for a in args]
    return [ev for part in parts for ev in part]


def write_events(events: Iterable[NewsEvent], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for ev in events:
            w.writerow(ev.row())


def read_events(path) -> list[NewsEvent]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            m = EventMeasures(
                n_at_peak=int(r["n_at_peak"]), total_volume=int(r["total_volume"]),
                duration_days=int(r["duration_days"]),
                days_since_last=int(r["days_since_last"]) if r["days_since_last"] else None,
                days_to_peak=int(r["days_to_peak"]), days_to_fade=int(r["days_to_fade"]),
                n_text_types=int(r["n_text_types"]), n_outlets=int(r["n_outlets"]),
            )
            out.append(NewsEvent(r["iso3"], dt.date.fromisoformat(r["first_day"]),
                                 dt.date.fromisoformat(r["last_day"]),
                                 dt.date.fromisoformat(r["peak_day"]), m))
    return out
