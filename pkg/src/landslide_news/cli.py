"""Command-line pipeline: ingest, geolocate, segment, score, evaluate, report, all."""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import sys
import tempfile
from collections import Counter
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .corpus import (DEFAULT_KEYWORDS, UnreadableInput, explode_instances,
                     flag_concatenations, keyword_filter, mentions_home, parse_documents,
                     read_gold, read_instances, write_documents, write_instances)
from .evaluate import IdMismatch, evaluate
from .events import OutOfPeriodInstance, detect_events, read_events, write_events
from .geolocate import (EndpointDown, ResponseCache, TemplateError, Verdict,
                        geolocate_corpus, read_results, write_results)
from .reference import (AdjustmentConfig, CountryReference, ReferenceDataError,
                        bundled_country_file, load_country_reference)
from .report import (DIMENSIONS, corpus_overview, daily_totals, deviation_boxplot,
                     distribution_table, events_by_year_continent, outlet_continent,
                     top_countries, write_rows, yearly_deviation)
from .salience import Category, read_scores, score_cohort, write_scores

logger = logging.getLogger("landslide_news")

STAGES = ("ingest", "geolocate", "segment", "score", "evaluate", "report")
SOURCES = {"EMDAT": "emdat_count", "WBGLHM": "wbglhm_freq"}

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


class MissingInput(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class Workspace:
    """The output directory: artifacts, atomic writes and the run manifest."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def path(self, name: str) -> Path:
        return self.dir / name

    def require(self, name: str) -> Path:
        p = self.path(name)
        if not p.is_file():
            raise MissingInput(f"{name} not found in {self.dir}; run the upstream stage first")
        self.inputs[name] = _sha256(p)
        return p

    def external(self, role: str, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise MissingInput(f"{role} file not found: {p}")
        self.inputs[role] = _sha256(p)
        return p

    @contextlib.contextmanager
    def write(self, name: str):
        """Yield a temporary path that replaces ``name`` only on success."""
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.dir)
        os.close(fd)
        try:
            yield Path(tmp)
            os.replace(tmp, self.path(name))
        except BaseException:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(tmp)
            raise
        self.outputs[name] = _sha256(self.path(name))

    def write_text(self, name: str, text: str) -> None:
        with self.write(name) as tmp:
            tmp.write_text(text, encoding="utf-8")

    def record(self, stage: str) -> None:
        mpath = self.path("manifest.json")
        manifest = {}
        if mpath.is_file():
            with contextlib.suppress(ValueError):
                manifest = json.loads(mpath.read_text("utf-8"))
        manifest["tool"] = f"landslide-news {__version__}"
        manifest["config"] = self.cfg.to_dict()
        manifest["config_hash"] = self.cfg.config_hash()
        stages = manifest.setdefault("stages", {})
        stages[stage] = {"config_hash": self.cfg.config_hash(),
                         "inputs": dict(sorted(self.inputs.items())),
                         "outputs": dict(sorted(self.outputs.items()))}
        self.inputs, self.outputs = {}, {}
        tmp = mpath.with_suffix(".json.tmp")
        tmp.write_text(_dump_json(manifest), encoding="utf-8")
        os.replace(tmp, mpath)


def load_reference(cfg: RunConfig, ws: Workspace | None = None) -> CountryReference:
    countries = cfg.countries or bundled_country_file()
    if ws is not None:
        ws.external("countries", countries)
    if cfg.adjustments:
        if ws is not None:
            ws.external("adjustments", cfg.adjustments)
        adjustments = AdjustmentConfig.from_file(cfg.adjustments)
    else:
        adjustments = AdjustmentConfig.default()
    files = cfg.indicator_files()
    if ws is not None:
        for role, p in files.items():
            ws.external(role, p)
    return load_country_reference(countries, files, adjustments,
                                  home_country=cfg.home_country,
                                  period_years=(cfg.period_start.year, cfg.period_end.year))


# -- stages ------------------------------------------------------------------------

def stage_ingest(cfg: RunConfig, ws: Workspace) -> None:
    if not cfg.documents:
        raise MissingInput("no documents file configured (--documents)")
    ref = load_reference(cfg, ws)
    docs, rejects = parse_documents(ws.external("documents", cfg.documents), cfg.period)
    n_parsed = len(docs)
    dropped = Counter()
    if cfg.keyword_filter:
        keywords = cfg.keywords or DEFAULT_KEYWORDS
        kept = [d for d in docs if keyword_filter(d, keywords)]
        dropped["no_keyword"] = len(docs) - len(kept)
        docs = kept
    if cfg.home_terms:
        kept = [d for d in docs if not mentions_home(d, cfg.home_terms)]
        dropped["home_mention"] = len(docs) - len(kept)
        docs = kept
    with ws.write("documents.jsonl") as tmp:
        write_documents(docs, tmp)
    ws.write_text("reference_summary.jsonl", ref.summary_jsonl())
    ws.write_text("ingest_summary.json", _dump_json({
        "documents_parsed": n_parsed,
        "documents_kept": len(docs),
        "rejected": rejects.to_dict(),
        "dropped": dict(sorted(dropped.items())),
        "flagged_concatenations": len(flag_concatenations(docs, cfg.concat_threshold)),
        "unique_texts": len({d.text_hash for d in docs}),
        "reference_records": len(ref),
        "reference_excluded": sorted(ref.excluded),
        "home_country": ref.home_country,
    }))


def _documents(ws: Workspace, cfg: RunConfig):
    docs, _ = parse_documents(ws.require("documents.jsonl"), cfg.period)
    return docs


def stage_geolocate(cfg: RunConfig, ws: Workspace) -> None:
    ref = load_reference(cfg, ws)
    docs = _documents(ws, cfg)
    client_cfg = cfg.client_config()
    cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
    partial = ws.path("geo.partial.jsonl")
    run = geolocate_corpus(docs, client_cfg, ref, cache=cache, partial_path=partial)
    with contextlib.suppress(FileNotFoundError):
        partial.unlink()
    with ws.write("geo.jsonl") as tmp:
        write_results(run.results, tmp)
    audit = {k: v for k, v in run.audit.items() if k not in ("cache_hits", "requests")}
    audit["documents"] = len(run.results)
    audit["relevant"] = sum(r.verdict is Verdict.RELEVANT for r in run.results)
    ws.write_text("geolocate_audit.json", _dump_json(dict(sorted(audit.items()))))


def stage_segment(cfg: RunConfig, ws: Workspace) -> None:
    ref = load_reference(cfg, ws)
    docs = _documents(ws, cfg)
    if cfg.countries_from == "gold":
        if not cfg.gold:
            raise MissingInput("countries_from=gold needs a gold file (--gold)")
        gold = {g.doc_id: sorted(g.countries) for g in read_gold(ws.external("gold", cfg.gold))}
        pairs = [(d, gold[d.doc_id]) for d in docs if d.doc_id in gold]
    else:
        geo = {r.doc_id: r.countries for r in read_results(ws.require("geo.jsonl"))}
        pairs = [(d, geo.get(d.doc_id, ())) for d in docs]
    tally: Counter = Counter()
    instances = explode_instances(pairs, ref, tally)
    events = detect_events(instances, cfg.period, cfg.max_gap, jobs=cfg.jobs)
    with ws.write("instances.csv") as tmp:
        write_instances(instances, tmp)
    with ws.write("events.csv") as tmp:
        write_events(events, tmp)
    ws.write_text("segment_summary.json", _dump_json({
        "documents_with_country": len({i.doc_id for i in instances}),
        "instances": len(instances),
        "rejected_codes": dict(sorted(tally.items())),
        "events": len(events),
        "countries_with_events": len({e.iso3 for e in events}),
        "max_gap": cfg.max_gap,
    }))


def _score_all(cfg: RunConfig, ref: CountryReference, events):
    news = Counter(e.iso3 for e in events)
    countries = [r.iso3 for r in ref.analyzable()]
    out = {}
    for source, attr in SOURCES.items():
        ext = {r.iso3: getattr(r, attr) for r in ref.analyzable()}
        out[source] = score_cohort(news, ext, countries, source, cfg.cohort_mode,
                                   cfg.band_fraction)
    return out


def stage_score(cfg: RunConfig, ws: Workspace) -> None:
    events = read_events(ws.require("events.csv"))
    ref = load_reference(cfg, ws)
    fits = {}
    for source, res in _score_all(cfg, ref, events).items():
        with ws.write(f"scores_{source}.csv") as tmp:
            write_scores(res.rows, tmp)
        fits[source] = {"beta0": res.fit.beta0, "beta1": res.fit.beta1, "n": res.fit.n,
                        "band_halfwidth": res.band_halfwidth,
                        "categories": dict(sorted(Counter(r.category.value
                                                          for r in res.rows).items()))}
    ws.write_text("score_summary.json", _dump_json({"cohort_mode": cfg.cohort_mode,
                                                    "band_fraction": cfg.band_fraction,
                                                    "fits": fits}))


def stage_evaluate(cfg: RunConfig, ws: Workspace) -> None:
    if not cfg.gold:
        raise MissingInput("no gold file configured (--gold)")
    gold = read_gold(ws.external("gold", cfg.gold))
    preds = {r.doc_id: r for r in read_results(ws.require("geo.jsonl"))}
    missing = {g.doc_id for g in gold} - set(preds)
    if missing:
        raise IdMismatch(set(), missing)
    report = evaluate([preds[g.doc_id] for g in gold], gold)
    ws.write_text("evaluation.json", report.to_json())
    ws.write_text("evaluation.txt", report.table())
    print(report.table(), end="")


def stage_report(cfg: RunConfig, ws: Workspace) -> None:
    events = read_events(ws.require("events.csv"))
    instances = read_instances(ws.require("instances.csv"))
    ref = load_reference(cfg, ws)
    scores = {s: read_scores(ws.require(f"scores_{s}.csv")) for s in SOURCES}

    top = top_countries(events, instances)
    write = lambda name, header, rows: _write_rows(ws, name, header, rows)  # noqa: E731
    write("top_countries.csv", ["rank", "iso3", "name", "n_events", "n_documents",
                                "n_active_days"],
          [(k, r.iso3, ref[r.iso3].name, r.n_events, r.n_documents, r.n_active_days)
           for k, r in enumerate(top, 1)])
    for dim in DIMENSIONS:
        write(f"distribution_{dim}.csv",
              ["dimension", "bucket", "n_news_events", "pct_news", "pct_emdat", "pct_wbglhm"],
              [(r.dimension, r.bucket, r.n_news_events, r.pct_news, r.pct_emdat, r.pct_wbglhm)
               for r in distribution_table(events, ref, dim)])
    for source in SOURCES:
        dev = yearly_deviation(events, ref, source,
                               cfg.emdat_mode if source == "EMDAT" else "total")
        write(f"yearly_deviation_{source}.csv",
              ["year", "subregion", "pct_news", "pct_external", "delta"],
              [(d.year, d.subregion, d.pct_news, d.pct_external, d.delta) for d in dev])
        box = deviation_boxplot(dev)
        write(f"yearly_deviation_boxplot_{source}.csv",
              ["subregion", "n_years", "min", "q1", "median", "q3", "max"],
              [tuple(b.values()) for b in box])
    by_dev = []
    for source, rows in scores.items():
        groups: dict[str, Counter] = {}
        for r in rows:
            groups.setdefault(ref[r.iso3].development.value, Counter())[r.category] += 1
        for level, c in sorted(groups.items()):
            n = sum(c.values())
            by_dev.append((source, level, n) + tuple(100.0 * c[cat] / n for cat in (
                Category.UNDERREPORTED, Category.SIMILAR, Category.OVERREPORTED)))
    write("divergence_by_development.csv",
          ["source", "development", "n_countries", "pct_underreported", "pct_similar",
           "pct_overreported"], by_dev)
    write("daily_totals.csv", ["date", "n_documents"],
          [(d.isoformat(), n) for d, n in daily_totals(instances, cfg.period)])
    write("events_by_year_continent.csv", ["year", "continent", "n_events"],
          events_by_year_continent(events, ref))
    write("outlet_continent.csv", ["outlet", "continent", "n_documents"],
          outlet_continent(instances, ref))
    write("event_measures_by_continent.csv",
          ["iso3", "continent", "subregion", "first_day", "total_volume", "duration_days"],
          [(e.iso3, ref[e.iso3].continent, ref[e.iso3].subregion, e.first_day.isoformat(),
            e.measures.total_volume, e.measures.duration_days) for e in events])

    fit_path = ws.path("score_summary.json")
    fits = json.loads(fit_path.read_text("utf-8"))["fits"] if fit_path.is_file() else {}
    ws.write_text("summary.json", _dump_json({
        "config_hash": cfg.config_hash(),
        "cohort_mode": cfg.cohort_mode,
        "emdat_mode": cfg.emdat_mode,
        "max_gap": cfg.max_gap,
        "band_fraction": cfg.band_fraction,
        "period": [cfg.period_start.isoformat(), cfg.period_end.isoformat()],
        "reference_countries": len(ref),
        "countries_without_instances": len(ref.analyzable()) - len({i.iso3 for i in instances}),
        "overview": corpus_overview(instances, events, cfg.period),
        "regression": fits,
    }))


def _write_rows(ws: Workspace, name: str, header, rows) -> None:
    with ws.write(name) as tmp:
        write_rows(tmp, header, rows)


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "geolocate": stage_geolocate,
    "segment": stage_segment,
    "score": stage_score,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run(stage: str, cfg: RunConfig) -> None:
    """Run one stage (or ``all``) against the workspace in ``cfg.out_dir``."""
    ws = Workspace(cfg)
    if stage == "all":
        chain = [s for s in STAGES if s != "evaluate" or cfg.gold]
        if cfg.countries_from == "gold":
            chain.remove("geolocate")
            if "evaluate" in chain:
                chain.remove("evaluate")
    else:
        chain = [stage]
    for name in chain:
        logger.info("stage %s", name)
        STAGE_FUNCS[name](cfg, ws)
        ws.record(name)


# -- argument parsing ---------------------------------------------------------------

_FLAGS = [
    # flag, config key, type, help
    ("--documents", "documents", str, "line-delimited JSON documents"),
    ("--countries", "countries", str, "country reference list (default: bundled UNSD list)"),
    ("--adjustments", "adjustments", str, "reference adjustment file"),
    ("--emdat", "emdat", str, "EM-DAT counts per country (or dated rows with a year column)"),
    ("--wbglhm", "wbglhm", str, "WB-GLHM annual frequency per country"),
    ("--risk", "risk", str, "landslide risk class per country"),
    ("--development", "development", str, "development status per country"),
    ("--income", "income", str, "income group per country"),
    ("--gold", "gold", str, "gold annotation file"),
    ("--out-dir", "out_dir", str, "artifact directory"),
    ("--period-start", "period_start", str, "first day of the study period"),
    ("--period-end", "period_end", str, "last day of the study period"),
    ("--home-country", "home_country", str, "iso3 of the home media system"),
    ("--max-gap", "max_gap", int, "inactive days allowed inside one event"),
    ("--band-fraction", "band_fraction", float, "similarity band as a fraction of max |div|"),
    ("--cohort", "cohort_mode", str, "regression cohort: any-nonzero, all, nonzero-both"),
    ("--emdat-mode", "emdat_mode", str, "yearly or total EM-DAT shares for deviations"),
    ("--countries-from", "countries_from", str, "geolocate or gold"),
    ("--jobs", "jobs", int, "worker threads for per-country segmentation"),
    ("--endpoint", "endpoint", str, "chat-completion base URL"),
    ("--model", "model", str, "model name sent to the endpoint"),
    ("--max-inflight", "max_inflight", int, "maximum concurrent requests"),
    ("--retries", "max_retries", int, "retries per request"),
    ("--timeout", "timeout", float, "request timeout in seconds"),
    ("--cache-dir", "cache_dir", str, "response cache directory"),
    ("--system-prompt", "system_prompt_file", str, "system prompt file"),
    ("--instruction", "instruction_file", str, "instruction template file ({document} slot)"),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file or a previous manifest.json")
    common.add_argument("-v", "--verbose", action="store_true")
    for flag, key, typ, help_ in _FLAGS:
        common.add_argument(flag, dest=key, type=typ, default=None, help=help_)
    common.add_argument("--no-keyword-filter", dest="keyword_filter", action="store_const",
                        const=False, default=None, help="keep documents without keywords")

    parser = argparse.ArgumentParser(prog="landslide-news",
                                     description="Landslide news attention pipeline.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "all"):
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    fx = sub.add_parser("make-fixture", help="write a synthetic input set")
    fx.add_argument("out_dir")
    fx.add_argument("--docs", type=int, default=5000)
    fx.add_argument("--seed", type=int, default=20240101)
    mock = sub.add_parser("mock-serve", help="serve a fixture's scripted replies")
    mock.add_argument("fixture_dir")
    return parser


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "make-fixture":
        from .synthetic import build_fixture
        print(build_fixture(args.out_dir, n_docs=args.docs, seed=args.seed))
        return EXIT_OK
    if args.command == "mock-serve":
        from .mockserver import ScriptedChatServer
        from .synthetic import load_responses, tag_responder
        import time
        with ScriptedChatServer(tag_responder(load_responses(args.fixture_dir))) as srv:
            print(srv.url, flush=True)
            with contextlib.suppress(KeyboardInterrupt):
                while True:
                    time.sleep(3600)
        return EXIT_OK

    overrides = {key: getattr(args, key) for _, key, _, _ in _FLAGS}
    overrides["keyword_filter"] = args.keyword_filter
    try:
        cfg = load_config(args.config, overrides)
        run(args.command, cfg)
    except (MissingInput, ConfigError, ReferenceDataError, UnreadableInput, IdMismatch,
            TemplateError, OutOfPeriodInstance, FileNotFoundError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_INPUT)
    except EndpointDown as exc:
        return _error("EndpointDown", str(exc), EXIT_RUNTIME)
    except Exception as exc:  # noqa: BLE001
        logger.debug("unhandled", exc_info=True)
        return _error(type(exc).__name__, str(exc), EXIT_RUNTIME)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
