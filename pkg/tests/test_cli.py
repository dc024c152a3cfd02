import json
import shutil

import pytest

from landslide_news.cli import main
from landslide_news.config import ConfigError, load_config
from landslide_news.corpus import DEFAULT_KEYWORDS
from landslide_news.mockserver import ScriptedChatServer
from landslide_news.synthetic import load_responses, tag_responder


@pytest.fixture(scope="module")
def server(small_fixture_dir):
    with ScriptedChatServer(tag_responder(load_responses(small_fixture_dir))) as srv:
        yield srv


def run_cli(*argv):
    return main([str(a) for a in argv])


def all_outputs(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def full_run(tmp_path_factory, small_fixture_dir, server):
    out = tmp_path_factory.mktemp("run")
    rc = run_cli("all", "--config", small_fixture_dir / "config.ini", "--endpoint", server.url,
                 "--out-dir", out)
    assert rc == 0
    return out


def expected_instances(fixture_dir, ref):
    """Count (doc, country) pairs straight from the scripted replies."""
    keep = {r.iso3 for r in ref.analyzable()}
    responses = load_responses(fixture_dir)
    kw = [k.casefold() for k in DEFAULT_KEYWORDS]
    total = 0
    with open(fixture_dir / "documents.jsonl", encoding="utf-8") as fh:
        for line in fh:
            try:
                d = json.loads(line)
            except ValueError:
                continue
            if not d["body"].strip() or d["date"] > "2024-12-31":
                continue
            if not any(k in (d["title"] + "\n" + d["body"]).casefold() for k in kw):
                continue
            try:
                reply = json.loads(responses[d["id"]])
            except ValueError:
                continue
            if isinstance(reply, dict):
                reply = reply["countries"]
            total += len({c.upper() for c in reply} & keep)
    return total


def test_all_stages_write_artifacts(full_run):
    names = set(all_outputs(full_run))
    for name in ("documents.jsonl", "geo.jsonl", "instances.csv", "events.csv",
                 "scores_EMDAT.csv", "scores_WBGLHM.csv", "evaluation.json", "summary.json",
                 "top_countries.csv", "distribution_risk.csv", "yearly_deviation_WBGLHM.csv",
                 "manifest.json"):
        assert name in names
    manifest = json.loads((full_run / "manifest.json").read_text())
    assert set(manifest["stages"]) == {"ingest", "geolocate", "segment", "score", "evaluate",
                                       "report"}


def test_instance_count_matches_replies(full_run, small_fixture_dir, bundled_reference):
    rows = (full_run / "instances.csv").read_text().splitlines()
    assert len(rows) - 1 == expected_instances(small_fixture_dir, bundled_reference)


def test_repeat_run_is_identical(tmp_path, full_run, small_fixture_dir, server):
    out = tmp_path / "again"
    assert run_cli("all", "--config", small_fixture_dir / "config.ini", "--endpoint",
                   server.url, "--out-dir", out, "--jobs", 3, "--max-inflight", 2) == 0
    assert all_outputs(out) == all_outputs(full_run)


def test_missing_events_is_input_error(tmp_path, capsys, small_fixture_dir):
    rc = run_cli("score", "--config", small_fixture_dir / "config.ini", "--out-dir", tmp_path)
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "MissingInput" and "events.csv" in err["message"]


def test_endpoint_down_is_runtime_error(tmp_path, capsys, small_fixture_dir, full_run):
    shutil.copy(full_run / "documents.jsonl", tmp_path / "documents.jsonl")
    rc = run_cli("geolocate", "--config", small_fixture_dir / "config.ini", "--out-dir",
                 tmp_path, "--endpoint", "http://127.0.0.1:9/v1", "--retries", 0)
    assert rc == 2
    assert json.loads(capsys.readouterr().err)["error"] == "EndpointDown"
    assert not (tmp_path / "geo.jsonl").exists()
    assert (tmp_path / "geo.partial.jsonl").exists()


def test_stage_isolation(tmp_path, full_run, small_fixture_dir):
    for name in ("documents.jsonl", "geo.jsonl"):
        shutil.copy(full_run / name, tmp_path / name)
    assert run_cli("segment", "--config", small_fixture_dir / "config.ini",
                   "--out-dir", tmp_path) == 0
    for name in ("instances.csv", "events.csv"):
        assert (tmp_path / name).read_bytes() == (full_run / name).read_bytes()
    (tmp_path / "events.csv").unlink()
    assert run_cli("segment", "--config", small_fixture_dir / "config.ini",
                   "--out-dir", tmp_path) == 0
    assert (tmp_path / "events.csv").read_bytes() == (full_run / "events.csv").read_bytes()


def test_manifest_round_trip(tmp_path, full_run, server):
    out = tmp_path / "replay"
    rc = run_cli("all", "--config", full_run / "manifest.json", "--endpoint", server.url,
                 "--out-dir", out)
    assert rc == 0
    same = all_outputs(full_run)
    for name, data in all_outputs(out).items():
        assert data == same[name], name


def test_gold_countries_mode(tmp_path, small_fixture_dir):
    rc = run_cli("all", "--config", small_fixture_dir / "config.ini", "--out-dir", tmp_path,
                 "--countries-from", "gold")
    assert rc == 0
    assert not (tmp_path / "geo.jsonl").exists()
    assert (tmp_path / "summary.json").exists()


def test_config_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nmax_gap = 6\n[client]\nendpoint = http://file/v1\n"
                   "[paths]\ndocuments = docs.jsonl\n")
    cfg = load_config(ini, env={})
    assert cfg.max_gap == 6 and cfg.endpoint == "http://file/v1"
    assert cfg.documents == str(tmp_path / "docs.jsonl")
    cfg = load_config(ini, env={"LANDSLIDE_NEWS_ENDPOINT": "http://env/v1"})
    assert cfg.endpoint == "http://env/v1"
    cfg = load_config(ini, {"endpoint": "http://flag/v1", "max_gap": 2, "documents": "x.jsonl"},
                      env={"LANDSLIDE_NEWS_ENDPOINT": "http://env/v1"})
    assert (cfg.endpoint, cfg.max_gap, cfg.documents) == ("http://flag/v1", 2, "x.jsonl")
    assert load_config(env={}).max_gap == 4


def test_config_hash_ignores_execution_settings():
    a = load_config(env={})
    b = load_config(overrides={"jobs": 8, "max_inflight": 16, "out_dir": "elsewhere"}, env={})
    c = load_config(overrides={"max_gap": 5}, env={})
    assert a.config_hash() == b.config_hash() != c.config_hash()


@pytest.mark.parametrize("text", ["[run]\nmax_gap = many\n", "[nope]\nx = 1\n",
                                  "[run]\ncolour = red\n", "[run]\nband_fraction = 1.5\n",
                                  "[run]\ncohort_mode = some\n"])
def test_bad_config(tmp_path, text, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    with pytest.raises(ConfigError):
        load_config(ini, env={})
    assert run_cli("segment", "--config", ini, "--out-dir", tmp_path) == 1


def test_make_fixture_command(tmp_path, capsys):
    assert run_cli("make-fixture", tmp_path / "fx", "--docs", 50) == 0
    assert (tmp_path / "fx" / "documents.jsonl").is_file()
