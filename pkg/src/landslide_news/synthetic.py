"""Deterministic synthetic corpus and indicator files for tests and demos.

Nothing here is real data: countries come from the bundled UNSD list, but all
indicator values, articles and model replies are generated from a seeded RNG.
Each document title carries a ``[#fx-NNNNNN]`` tag that the scripted endpoint
uses to look up its reply.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import re
import shutil
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import DEFAULT_KEYWORDS, DEFAULT_PERIOD, GoldRecord, write_gold
from .reference import AdjustmentConfig, read_countries, bundled_country_file

TAG_RE = re.compile(r"\[#(fx-\d{6})\]")

_NORTH = {"Northern America", "Northern Europe", "Western Europe", "Southern Europe",
          "Eastern Europe", "Australia and New Zealand"}
_OUTLETS = [
    "Süddeutsche Zeitung", "Frankfurter Allgemeine", "Die Welt", "taz", "Der Tagesspiegel",
    "Berliner Zeitung", "Stuttgarter Zeitung", "Rheinische Post", "Hamburger Abendblatt",
    "Kölner Stadt-Anzeiger", "Nürnberger Nachrichten", "Mannheimer Morgen",
    "Badische Zeitung", "Aachener Zeitung", "Westdeutsche Allgemeine", "Neue Presse",
    "Augsburger Allgemeine", "Main-Post", "Schwäbische Zeitung", "Leipziger Volkszeitung",
]
_TYPES = ["Bericht", "Meldung", "Nachricht", "Reportage", "Kommentar"]
_FILLER = [
    "Rettungskräfte suchen nach Verschütteten.",
    "Mehrere Häuser wurden zerstört.",
    "Die Behörden riefen den Notstand aus.",
    "Starke Regenfälle hatten den Boden aufgeweicht.",
    "Die Straße bleibt vorerst gesperrt.",
    "Anwohner wurden in Sicherheit gebracht.",
    "Nach Angaben der Polizei gab es Verletzte.",
    "Experten warnen vor weiteren Abgängen.",
]
_UNRELATED = [
    "Die Börse schloss am Freitag mit leichten Gewinnen.",
    "Der Stadtrat diskutierte über den neuen Haushalt.",
    "Im Wahlkampf kam es zu einem Erdrutschsieg der Opposition.",
    "Ein politischer Erdrutsch veränderte die Mehrheiten im Parlament.",
]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _indicators(out: Path, rng: np.random.Generator, codes: list[tuple[str, str]],
                period: tuple[dt.date, dt.date]) -> dict[str, float]:
    """Write the five indicator files; returns a per-country susceptibility weight."""
    years = range(period[0].year, period[1].year + 1)
    hazard = {c: float(rng.lognormal(0.0, 1.5)) for c, _ in codes}
    emdat_rows, wb_rows, risk_rows, dev_rows, inc_rows = [], [], [], [], []
    hz = np.array(list(hazard.values()))
    q = np.quantile(hz, [0.25, 0.5, 0.75])
    for code, sub in codes:
        h = hazard[code]
        for y in years:
            n = int(rng.poisson(0.08 * h))
            if n:
                emdat_rows.append((code, y, n))
        if rng.random() > 0.03:
            wb_rows.append((code, round(h * float(rng.lognormal(0, 0.5)) * 10, 4)))
        if rng.random() > 0.02:
            level = ("very low" if h < q[0] else "low" if h < q[1]
                     else "medium" if h < q[2] else "high")
            risk_rows.append((code, level))
        dev_rows.append((code, "developed" if sub in _NORTH else "developing"))
        if rng.random() > 0.04:
            inc_rows.append((code, str(rng.choice(
                ["High income", "Upper middle income", "Lower middle income", "Low income"],
                p=[0.3, 0.3, 0.25, 0.15] if sub not in _NORTH else [0.8, 0.15, 0.05, 0.0]))))
    _write_csv(out / "emdat.csv", ["iso3", "year", "count"], emdat_rows)
    _write_csv(out / "wbglhm.csv", ["iso3", "frequency"], wb_rows)
    _write_csv(out / "risk.csv", ["iso3", "risk"], risk_rows)
    _write_csv(out / "development.csv", ["iso3", "status"], dev_rows)
    _write_csv(out / "income.csv", ["iso3", "income"], inc_rows)
    return hazard


def build_fixture(out_dir, n_docs: int = 5000, seed: int = 20240101,
                  period: tuple[dt.date, dt.date] = DEFAULT_PERIOD,
                  n_gold: int = 450) -> Path:
    """Write a complete synthetic input set under ``out_dir``.

    Files: countries.csv, adjustments.ini, the five indicator files,
    documents.jsonl, responses.json (tag -> scripted reply), gold.csv and a
    config.ini that points at all of them.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    shutil.copyfile(bundled_country_file(), out / "countries.csv")
    adj_text = resources.files("landslide_news.data").joinpath("adjustments.ini").read_text(
        "utf-8")
    (out / "adjustments.ini").write_text(adj_text, encoding="utf-8")
    adj = AdjustmentConfig.from_text(adj_text)
    rows = read_countries(out / "countries.csv")
    codes = [(c, s) for _, c, _, s in rows if c not in adj.exclusions]
    codes += [(c, s) for c, (_, s) in adj.additions.items() if c not in {x for x, _ in codes}]
    names = {c: n for _, c, n, _ in rows}
    names.update({c: n for c, (n, _) in adj.additions.items()})
    hazard = _indicators(out, rng, codes, period)

    # news attention: heavy-tailed mix of hazard and proximity
    foreign = [c for c, _ in codes if c != adj.home_country]
    weight = np.array([hazard[c] * (4.0 if s in _NORTH else 1.0) for c, s in codes
                       if c != adj.home_country])
    weight = weight ** 1.3
    weight[rng.random(weight.size) < 0.3] = 0.0  # countries never covered
    weight /= weight.sum()

    n_days = (period[1] - period[0]).days + 1
    docs, responses, truth = [], {}, {}
    i = 0
    while i < n_docs:
        country = str(rng.choice(foreign, p=weight))
        start = int(rng.integers(0, n_days))
        story_len = int(min(rng.geometric(0.35), n_docs - i))
        span = int(rng.integers(1, 9))
        kw = str(rng.choice(DEFAULT_KEYWORDS))
        story_body = (f"{names[country]}: Ein {kw} hat schwere Schäden angerichtet. "
                      + " ".join(rng.choice(_FILLER, size=3)))
        for _ in range(story_len):
            tag = f"fx-{i:06d}"
            day = min(start + int(rng.integers(0, span)), n_days - 1)
            date = period[0] + dt.timedelta(days=day)
            r = rng.random()
            countries = [country]
            if r < 0.08:
                countries.append(str(rng.choice(foreign, p=weight)))
            relevant = True
            if r > 0.88:
                relevant, countries = False, []
                body = " ".join(rng.choice(_UNRELATED, size=2))
            elif rng.random() < 0.4:
                body = story_body
            else:
                body = (f"In {names[country]} kam es zu einer {kw.lower()}-artigen "
                        f"Bewegung am Hang. " + " ".join(rng.choice(_FILLER, size=2)))
            countries = list(dict.fromkeys(countries))
            docs.append({"id": tag, "date": date.isoformat(),
                         "outlet": str(rng.choice(_OUTLETS)),
                         "title": f"[#{tag}] Meldung aus {names[country]}",
                         "body": body, "type": str(rng.choice(_TYPES))})
            truth[tag] = countries

            # scripted reply, with some model-like mistakes
            q = rng.random()
            predicted = list(countries)
            if not relevant:
                predicted = ["N/A"] if q < 0.8 else [country]
            elif q < 0.03:
                predicted = []
            elif q < 0.07:
                predicted = predicted + [str(rng.choice(foreign))]
            elif q < 0.09:
                predicted = predicted + ["DEU"]
            elif q < 0.10:
                predicted = predicted + ["XKX"]
            if q > 0.99:
                reply = "Ich kann diese Anfrage leider nicht beantworten."
            elif not predicted or predicted == ["N/A"]:
                reply = "N/A"
            elif q > 0.95:
                reply = json.dumps({"countries": [p.lower() for p in predicted]})
            else:
                reply = json.dumps(predicted)
            responses[tag] = reply
            i += 1

    # a few records the parser must reject
    docs.append({"id": "fx-bad-date", "date": "2025-03-01", "outlet": "taz",
                 "title": "spät", "body": "Ein Erdrutsch.", "type": "Meldung"})
    docs.append({"id": "fx-empty", "date": "2010-05-05", "outlet": "taz", "title": "leer",
                 "body": "   ", "type": "Meldung"})
    with open(out / "documents.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps(d, ensure_ascii=False) + "\n")
        fh.write("{not json\n")
    (out / "responses.json").write_text(json.dumps(responses, indent=0, sort_keys=True),
                                        encoding="utf-8")

    # gold is drawn from the candidates that survive the keyword pre-filter
    kw = [k.casefold() for k in DEFAULT_KEYWORDS]
    tags = sorted(d["id"] for d in docs if d["id"] in truth
                  and any(k in (d["title"] + "\n" + d["body"]).casefold() for k in kw))
    gold_ids = sorted(rng.choice(tags, size=min(n_gold, len(tags)), replace=False).tolist())
    write_gold([GoldRecord(t, bool(truth[t]), frozenset(truth[t])) for t in gold_ids],
               out / "gold.csv")

    (out / "config.ini").write_text(f"""\
[run]
period_start = {period[0].isoformat()}
period_end = {period[1].isoformat()}

[paths]
documents = documents.jsonl
countries = countries.csv
adjustments = adjustments.ini
emdat = emdat.csv
wbglhm = wbglhm.csv
risk = risk.csv
development = development.csv
income = income.csv
gold = gold.csv

[client]
max_retries = 2
backoff = 0.01
timeout = 10
""", encoding="utf-8")
    return out


def tag_responder(responses: dict[str, str]):
    """Responder for :class:`ScriptedChatServer` keyed by the fixture title tag."""
    def respond(body: dict):
        text = body["messages"][-1]["content"]
        m = TAG_RE.search(text)
        if not m or m.group(1) not in responses:
            return 200, "N/A"
        return 200, responses[m.group(1)]
    return respond


def load_responses(fixture_dir) -> dict[str, str]:
    return json.loads((Path(fixture_dir) / "responses.json").read_text(encoding="utf-8"))
