import csv
import datetime as dt
from pathlib import Path

import pytest

from landslide_news.reference import (AdjustmentConfig, bundled_country_file,
                                      load_country_reference)
from landslide_news.synthetic import build_fixture


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def toy_reference(tmp_path, countries, indicators=None, home="DEU", exclusions=(),
                  additions=None, aliases=None):
    """Reference built from ``countries`` [(iso3, name, subregion)] and indicator rows."""
    cfile = write_csv(tmp_path / "countries.csv", ["iso3", "name", "subregion"], countries)
    files = {}
    for source, (header, rows) in (indicators or {}).items():
        files[source] = write_csv(tmp_path / f"{source}.csv", header, rows)
    adj = AdjustmentConfig(home_country=home, exclusions={c: "" for c in exclusions},
                           additions=dict(additions or {}), aliases=dict(aliases or {}))
    return load_country_reference(cfile, files, adj)


@pytest.fixture
def make_reference(tmp_path):
    def make(*args, **kwargs):
        return toy_reference(tmp_path, *args, **kwargs)
    return make


@pytest.fixture(scope="session")
def bundled_reference():
    return load_country_reference(bundled_country_file())


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    return build_fixture(tmp_path_factory.mktemp("fixture"), n_docs=5000)


@pytest.fixture(scope="session")
def small_fixture_dir(tmp_path_factory):
    return build_fixture(tmp_path_factory.mktemp("small_fixture"), n_docs=400, seed=7,
                         n_gold=80)


D0 = dt.date(2000, 1, 1)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
