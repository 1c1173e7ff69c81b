#!/usr/bin/env python3
"""Writes the synthetic demo project used by the end-to-end tests.

Usage: make_demo_project.py OUT_DIR [--docs N] [--seed S]
"""
import argparse
import json
import random
import shutil
from pathlib import Path

# word -> POS for every word the generator can emit
POS = {}


def tag(pos, *words):
    for w in words:
        POS.setdefault(w.lower(), pos)
    return list(words)


FRAME = {
    "det": tag("DET", "the", "a", "this", "every"),
    "prep": tag("PREP", "in", "at", "on", "during", "after", "before", "near", "with", "for", "from", "of"),
}
tag("PROPN", "Paris", "France", "Seine", "Tokyo", "London", "Olympics", "Games", "Marchand", "Ledecky",
    "McIntosh", "Biles", "Duplantis", "Lyles", "Jacobs", "Hassan")
tag("ADJ", "Olympic", "first", "second", "third", "new", "historic", "local", "official", "record", "late",
    "early", "huge", "strict", "extra", "public", "heavy", "clean", "hot", "high", "low", "live", "national",
    "women", "400-metre", "200-metre", "100-metre")
tag("PUNCT", ".", ",")
tag("PART", "'s")
tag("NOUN", "gold", "medal", "medley", "silver", "bronze")
tag("VERB", "won", "claimed", "took", "secured", "shared", "lost", "missed", "said", "is", "was", "were", "are")
tag("NUM", "2024", "two", "three", "four", "ten")

# Each topic: nouns, verbs, adjectives. The generator draws from these.
TOPICS = [
    dict(nouns="swimmer pool freestyle relay lap butterfly breaststroke backstroke lane heat".split(),
         verbs="swam touched dived raced".split(), adjs="fastest smooth".split()),
    dict(nouns="sprinter track marathon hurdles stadium runner finish javelin pole jump".split(),
         verbs="sprinted jumped threw cleared".split(), adjs="explosive quick".split()),
    dict(nouns="gymnast vault beam routine judges score apparatus landing floor tumbling".split(),
         verbs="landed twisted scored performed".split(), adjs="flawless difficult".split()),
    dict(nouns="ceremony parade boats flag torch performers river cauldron spectators bridge".split(),
         verbs="sailed lit paraded celebrated".split(), adjs="spectacular colourful".split()),
    dict(nouns="police security soldiers checkpoint threat surveillance perimeter officers drones patrol".split(),
         verbs="guarded patrolled screened deployed".split(), adjs="armed vigilant".split()),
    dict(nouns="metro traffic commuters residents buses tourists hotels streets station queues".split(),
         verbs="crowded delayed closed rerouted".split(), adjs="congested busy".split()),
    dict(nouns="tickets prices sponsors budget revenue costs euros sales investment economy".split(),
         verbs="paid sold funded raised".split(), adjs="expensive profitable".split()),
    dict(nouns="broadcast viewers television audience coverage streaming journalists ratings channel cameras".split(),
         verbs="watched streamed filmed reported".split(), adjs="global digital".split()),
    dict(nouns="temperature rain water quality pollution climate bacteria cleanup testing sunshine".split(),
         verbs="tested rained polluted cooled".split(), adjs="warm humid".split()),
]
for t in TOPICS:
    tag("NOUN", *t["nouns"])
    tag("VERB", *t["verbs"])
    tag("ADJ", *t["adjs"])

ATHLETES = ["Marchand", "Ledecky", "McIntosh", "Biles", "Duplantis", "Lyles", "Jacobs", "Hassan"]
EVENTS = [["women", "'s", "400-metre", "medley"], ["200-metre", "freestyle"], ["100-metre", "final"]]
tag("NOUN", "final")


def topical_sentence(rng, topic):
    t = TOPICS[topic]
    n = lambda: rng.choice(t["nouns"])
    shape = rng.randrange(3)
    if shape == 0:
        words = ["The", n(), rng.choice(t["verbs"]), rng.choice(FRAME["prep"]), "the", rng.choice(t["adjs"]), n(), "."]
    elif shape == 1:
        words = ["A", rng.choice(t["adjs"]), n(), "and", "the", n(), rng.choice(t["verbs"]), "the", n(), "."]
    else:
        words = [n().capitalize(), rng.choice(t["verbs"]), "near", "the", n(), "with", "the", n(), "."]
    return words


def keyword_sentence(rng):
    return rng.choice([
        ["The", "Paris", "Olympics", "opened", "in", "2024", "."],
        ["Officials", "said", "the", "Olympic", "programme", "was", "on", "schedule", "."],
        ["Crowds", "gathered", "for", "the", "Olympic", "Games", "."],
    ])


tag("VERB", "opened", "gathered")
tag("NOUN", "officials", "programme", "schedule", "crowds")
tag("OTHER", "and")

MEDAL_VERBS = {"won": 6, "claimed": 3, "took": 2, "secured": 2, "shared": 2, "lost": 1, "missed": 1}
MEDAL_MODS = ["first", "second", "historic", "Olympic", None]


def medal_sentence(rng):
    athlete = rng.choice(ATHLETES)
    verb = rng.choices(list(MEDAL_VERBS), weights=list(MEDAL_VERBS.values()))[0]
    mod = rng.choice(MEDAL_MODS)
    words = [athlete, verb]
    if rng.random() < 0.8:
        words.append("the")
    if mod:
        words.append(mod)
    words += ["gold", "medal", "in", "the"] + rng.choice(EVENTS) + ["."]
    return words


def render(words):
    out = ""
    for w in words:
        if out and w not in (".", ",", "'s"):
            out += " "
        out += w
    return out


def make_doc(rng, i, keyword_hits):
    main = rng.randrange(len(TOPICS))
    second = rng.randrange(len(TOPICS))
    sentences = []
    for _ in range(rng.randint(5, 7)):
        topic = main if rng.random() < 0.8 else second
        sentences.append(topical_sentence(rng, topic))
    if main <= 2 and rng.random() < 0.7:
        sentences.insert(rng.randrange(len(sentences) + 1), medal_sentence(rng))
    for _ in range(keyword_hits):
        sentences.insert(rng.randrange(len(sentences) + 1), keyword_sentence(rng))
    body = " ".join(render(s) for s in sentences)
    month = 7 + (i % 2)
    day = 1 + (i % 28)
    return {
        "id": f"en-{i:04d}",
        "source": rng.choice(["The Daily Courier", "Morning Ledger", "Evening Star"]),
        "lang": "en",
        "date": f"2024-{month:02d}-{day:02d}",
        "title": f"Report {i}",
        "body": body,
    }


PATTERNS = """\
# name := slot pattern
gold_medal := V ( "the" ) ( MOD ) "gold" NODE
event := "women" "'s" MOD NODE
host := PREP MOD NODE
"""

VERB_SCHEME = """\
winning: won, claimed, took, secured
sharing: shared
losing: lost, missed
"""

MAPPING = """\
# raw topic -> action (9 raw topics -> 7 analysis topics)
0 keep
1 keep
2 merge 1
3 keep
4 keep
5 keep
6 keep
7 keep
8 drop
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--docs", type=int, default=320)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = Path(args.out)
    (out / "schemes").mkdir(parents=True, exist_ok=True)

    docs = []
    for i in range(args.docs):
        hits = 2 if i % 8 else rng.choice([0, 1])  # every eighth document is off-topic for the filter
        if hits == 2 and rng.random() < 0.3:
            hits = 3
        docs.append(make_doc(rng, i, hits))
    with open(out / "corpus_en.jsonl", "w", encoding="utf-8") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")

    with open(out / "tags_en.txt", "w", encoding="utf-8") as f:
        f.write("# surface POS\n")
        for w in sorted(POS):
            f.write(f"{w}\t{POS[w]}\n")
    with open(out / "lemmas_en.txt", "w", encoding="utf-8") as f:
        f.write("# surface lemma\n")
        for a, b in [("won", "win"), ("took", "take"), ("lost", "lose"), ("swam", "swim"), ("threw", "throw"),
                     ("paid", "pay"), ("sold", "sell"), ("lit", "light"), ("medals", "medal"), ("was", "be"),
                     ("were", "be"), ("is", "be"), ("are", "be")]:
            f.write(f"{a}\t{b}\n")
    shutil.copyfile(Path(__file__).resolve().parent.parent / "data" / "stoplists" / "en.txt", out / "stoplist_en.txt")
    with open(out / "stoplist_en.txt", "a", encoding="utf-8") as f:
        f.write("# corpus-specific\n")
        for w in ["olympic", "olympics", "games", "paris", "2024", "near", "officials", "programme", "schedule",
                  "crowds", "gathered", "opened"]:
            f.write(w + "\n")
    (out / "patterns.txt").write_text(PATTERNS, encoding="utf-8")
    (out / "schemes" / "medal_verbs.txt").write_text(VERB_SCHEME, encoding="utf-8")
    (out / "mapping_9to7.txt").write_text(MAPPING, encoding="utf-8")
    with open(out / "descriptions.txt", "w", encoding="utf-8") as f:
        f.write("# topic<TAB>description, '-' marks a topic skipped as too abstract\n")
        for i, text in enumerate(["swimming events", "athletics and gymnastics", "opening ceremony on the river",
                                  "security operation", "-", "ticketing and money", "media coverage"]):
            f.write(f"{i}\t{text}\n")
    config = {
        "version": 1,
        "workspace": "workspace",
        "languages": {
            "en": {
                "corpus": "corpus_en.jsonl",
                "stoplist": "stoplist_en.txt",
                "lemmas": "lemmas_en.txt",
                "tagger": "tags_en.txt",
                "keywords": ["Olympic", "Olympics"],
                "min_keyword_hits": 2,
            }
        },
        "lda": {"num_topics": 9, "iterations": 300, "burn_in": 100, "seed": 7, "min_df": 3, "top_keywords": 10},
        "sweep": {"kmin": 2, "kmax": 20, "metric": "umass", "top_n": 10, "iterations": 60},
        "llm": {"provider": "mock"},
        "patterns": "patterns.txt",
        "schemes": {"medal_verbs": "schemes/medal_verbs.txt"},
        "server": {"host": "127.0.0.1", "port": 8765},
    }
    (out / "corpuslens.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
