#!/usr/bin/env python3
"""Regenerates the bundled fixtures under data/fixtures.

    python3 tools/gen_fixtures.py [--out data/fixtures]

Output is deterministic for a given --seed. The disambiguation goldens are
computed here, independently of the C++ filter.
"""

import argparse
import json
import os
import random

FIRST = ["Maria", "John", "Aisha", "Kenji", "Elena", "Tomas", "Priya", "Lars", "Fatima", "Diego",
         "Hannah", "Omar", "Sofia", "Viktor", "Grace", "Mateo", "Ingrid", "Samuel", "Leila", "Paulo"]
LAST = ["Lopez", "Smith", "Khan", "Tanaka", "Petrova", "Novak", "Sharma", "Berg", "Haddad", "Ruiz",
        "Fischer", "Nasser", "Rossi", "Ivanov", "Okafor", "Silva", "Larsen", "Cohen", "Farah", "Costa"]
ORGS = ["Acme Corp", "Northwind Traders", "Globex", "the Harbor Authority", "Blue River Bank",
        "the city council", "Helios Energy", "Summit Health", "the Tribune", "Redwood Labs",
        "Orion Shipping", "the transit agency"]
PLACES = ["Lisbon", "Oslo", "Nairobi", "Osaka", "Quebec", "Valparaiso", "Tallinn", "Porto",
          "Accra", "Bergen", "Cusco", "Kyoto"]
ADJS = ["old", "new", "small", "large", "public", "private", "northern", "local", "annual",
        "main", "wooden", "historic", "quiet", "busy", "modern"]
NOUNS = ["harbor", "bridge", "library", "market", "station", "school", "hospital", "museum",
         "factory", "garden", "report", "budget", "festival", "stadium", "clinic", "tunnel",
         "warehouse", "orchard", "pier", "archive"]
VERBS = ["visited", "praised", "described", "criticized", "funded", "inspected", "photographed",
         "reviewed", "mentioned", "defended", "restored", "measured"]
MONTHS = ["January", "March", "April", "June", "August", "October", "December"]
STATES = ["crowded", "closed", "quiet", "flooded", "renovated", "expensive", "popular"]


def noun_phrase(rng):
    if rng.random() < 0.15:
        return f"the {rng.choice(ADJS)} {rng.choice(ADJS)} {rng.choice(NOUNS)} of {rng.choice(PLACES)}"
    return f"the {rng.choice(ADJS)} {rng.choice(NOUNS)}"


def cast(rng):
    people = [f"{rng.choice(FIRST)} {rng.choice(LAST)}" for _ in range(2)]
    things = [noun_phrase(rng) for _ in range(3)]
    return people, rng.choice(ORGS), things, rng.choice(PLACES)


def cap(s):
    return s[0].upper() + s[1:]


def sentence(rng, people, org, things, place):
    p, q = rng.choice(people), rng.choice(people)
    t, u = rng.choice(things), rng.choice(things)
    forms = [
        lambda: f"{p} {rng.choice(VERBS)} {t} in {place}.",
        lambda: f"{cap(t)} was {rng.choice(STATES)} after the storm.",
        lambda: f"{cap(org)} {rng.choice(VERBS)} {t}.",
        lambda: f"In {rng.choice(MONTHS)}, {p} {rng.choice(VERBS)} {t} for {org}.",
        lambda: f"Officials said {t} would reopen in {rng.choice(MONTHS)}.",
        lambda: f"{p} and {q} met near {u}.",
        lambda: f"\"We {rng.choice(VERBS)} {t},\" said {p}.",
        lambda: f"Dr. {p.split()[1]} {rng.choice(VERBS)} {u} with {org}.",
        lambda: f"Is {t} still {rng.choice(STATES)}? {p} thinks so.",
        lambda: f"{cap(org)} paid 3.5 million for {u} in {place}.",
    ]
    return rng.choice(forms)()


def corpus(rng, docs):
    out = []
    for i in range(docs):
        people, org, things, place = cast(rng)
        n = rng.randint(8, 18)
        text = " ".join(sentence(rng, people, org, things, place) for _ in range(n))
        out.append({"id": f"doc-{i:04d}", "text": text})
    return out


def chat(rng, records):
    out = []
    for i in range(records):
        people, org, things, place = cast(rng)
        turns = []
        for _ in range(rng.choice([1, 1, 2])):
            context = " ".join(sentence(rng, people, org, things, place) for _ in range(rng.randint(3, 6)))
            t = rng.choice(things)
            p = rng.choice(people)
            question = rng.choice([f"Who {rng.choice(VERBS)} {t}?", f"What did {p} visit?",
                                   f"Where is {t}?"])
            turns.append({"role": "user", "text": f"{context} {question}"})
            answer = rng.choice([f"{p} {rng.choice(VERBS)} {t} in {place}.",
                                 f"It was {t}, according to {org}.",
                                 f"{cap(t)} is in {place}, near {rng.choice(things)}."])
            turns.append({"role": "assistant", "text": answer})
        out.append({"id": f"chat-{i:03d}", "turns": turns})
    return out


# ---- disambiguation fixture ------------------------------------------------

DISAMB_INSTRUCTION = ("The organization entity must be a subject of any active action in the "
                      "context.")


def conll_sentences(rng, count):
    sents, seen = [], set()
    while len(sents) < count:
        org = rng.choice(["Acme Corp", "Globex", "Blue River Bank", "Helios Energy", "Redwood Labs",
                          "Summit Health", "Orion Shipping"])
        person = f"{rng.choice(FIRST)} {rng.choice(LAST)}"
        place = rng.choice(PLACES)
        pattern = rng.choice(["org_acts", "org_object", "two_orgs"])
        toks, tags = [], []

        def add(words, label=None):
            for j, w in enumerate(words.split()):
                toks.append(w)
                tags.append("O" if label is None else ("B-" if j == 0 else "I-") + label)

        if pattern == "org_acts":
            add(org, "ORG"); add("hired"); add(person, "PER"); add("in"); add(place, "LOC"); add(".")
        elif pattern == "org_object":
            add(person, "PER"); add("wrote about"); add(org, "ORG"); add("in"); add(place, "LOC"); add(".")
        else:
            other = rng.choice([o for o in ["Northwind Traders", "Globex", "Acme Corp"] if o != org])
            add(org, "ORG"); add("sued"); add(other, "ORG"); add("over a contract"); add(".")
        if " ".join(toks) in seen:
            continue
        seen.add(" ".join(toks))
        sents.append((toks, tags))
    return sents


def bio_entities(tags):
    ents, i = [], 0
    while i < len(tags):
        if tags[i] == "O":
            i += 1
            continue
        label = tags[i][2:]
        j = i + 1
        while j < len(tags) and tags[j] == "I-" + label:
            j += 1
        ents.append((label, i, j))
        i = j
    return ents


def judge_verdict(replies, retries=1):
    """Mirror of the documented retry policy: ask up to 1 + retries times."""
    used = []
    for attempt in range(retries + 1):
        reply = replies[min(attempt, len(replies) - 1)] if replies else "yes"
        used.append(reply)
        word = reply.strip(" \t\n\r\"'.!").lower()
        if word in ("yes", "no"):
            return used, word == "yes", (["retried"] if attempt > 0 else [])
    return used, True, ["nonconforming_default_keep"]


def dumps(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def disambiguation(rng, out_dir):
    sents = conll_sentences(rng, 30)
    with open(os.path.join(out_dir, "disamb_input.conll"), "w") as f:
        f.write("-DOCSTART- -X- -X- O\n\n")
        for toks, tags in sents:
            for t, g in zip(toks, tags):
                f.write(f"{t} NNP B-NP {g}\n")
            f.write("\n")

    # Scripted by surface string; some first replies are malformed.
    script = {
        "Globex": ["maybe", "no"],
        "Summit Health": ["no"],
        "Orion Shipping": ["I am not sure", "perhaps"],
        "Northwind Traders": ["No."],
        "Helios Energy": ["Yes"],
    }
    with open(os.path.join(out_dir, "judge_script.jsonl"), "w") as f:
        for entity, replies in script.items():
            f.write(dumps({"entity": entity, "replies": replies}) + "\n")

    audit, records = [], []
    for idx, (toks, tags) in enumerate(sents):
        context = " ".join(toks)
        kept = []
        for label, s, e in bio_entities(tags):
            if label != "ORG":
                kept.append({"label": label, "start": s, "end": e, "scoring": True})
                continue
            text = " ".join(toks[s:e])
            prompt = (f"{DISAMB_INSTRUCTION} Does \"{text}\" in \"{context}\" satisfy the definition "
                      f"above? Answer \"yes\" or \"no\" only.")
            used, keep, flags = judge_verdict(script.get(text, []))
            audit.append({"id": str(idx), "entity": {"label": "ORG", "start": s, "end": e, "text": text},
                          "prompt": prompt, "replies": used, "decision": "keep" if keep else "drop",
                          "flags": flags})
            if keep:
                kept.append({"label": label, "start": s, "end": e, "scoring": True})
        records.append({"id": str(idx), "tokens": toks, "entities": kept,
                        "instruction": DISAMB_INSTRUCTION})

    with open(os.path.join(out_dir, "disamb_expected.jsonl"), "w") as f:
        for r in records:
            f.write(dumps(r) + "\n")
    with open(os.path.join(out_dir, "disamb_audit_expected.jsonl"), "w") as f:
        for a in audit:
            f.write(dumps(a) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "fixtures"))
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--docs", type=int, default=800)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    rng = random.Random(args.seed)
    with open(os.path.join(args.out, "corpus.jsonl"), "w") as f:
        for rec in corpus(rng, args.docs):
            f.write(dumps(rec) + "\n")
    with open(os.path.join(args.out, "chat.jsonl"), "w") as f:
        for rec in chat(rng, 200):
            f.write(dumps(rec) + "\n")
    disambiguation(rng, args.out)


if __name__ == "__main__":
    main()
