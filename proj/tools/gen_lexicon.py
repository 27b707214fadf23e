#!/usr/bin/env python3
"""Regenerate data/pos_lexicon.tsv from the WordNet-derived lemma tables
shipped in the `spacy-lookups-data` wheel.

    pip download spacy-lookups-data --no-deps -d /tmp/sld
    python3 tools/gen_lexicon.py /tmp/sld/spacy_lookups_data-*.whl data/pos_lexicon.tsv

Closed-class words come from the hand-written table below and always win.
Open-class words are ranked by unigram log-probability and the top entries
are kept. Ambiguous words lean toward NOUN so span proposal favours recall.
"""

import gzip
import json
import sys
import zipfile

LIMIT = 50000

CLOSED = {
    "DET": "a an the this that these those some any each every no another either neither "
           "all both half such what which whatever whichever my your his her its our their "
           "whose much many few several enough",
    "PRON": "i me you he him she it we us they them myself yourself himself herself itself "
            "ourselves yourselves themselves mine yours hers ours theirs who whom someone "
            "anyone everyone somebody anybody everybody nobody something anything everything "
            "nothing one ones none whoever whomever",
    "ADP": "of in on at by for with about against between into through during before after "
           "above below to from up down out off over under again further than via per "
           "among amongst across along around behind beside besides beyond despite except "
           "inside outside onto toward towards upon within without throughout underneath "
           "unlike like near since until till",
    "CCONJ": "and or but nor yet plus",
    "SCONJ": "if because although though while whereas unless whether once so as when where "
             "whenever wherever why how then that",
    "AUX": "be am is are was were been being have has had having do does did doing will "
           "would shall should can could may might must ought 's 're 've 'd 'll 'm",
    "PART": "not n't to 's",
    "ADV": "very too also just only really quite rather almost already always never often "
           "sometimes usually here there now then still even ever soon perhaps maybe yes "
           "indeed however therefore thus hence instead meanwhile otherwise anyway",
    "INTJ": "oh ah hey hello hi wow ok okay please thanks",
    "NUM": "zero two three four five six seven eight nine ten eleven twelve thirteen "
           "fourteen fifteen sixteen seventeen eighteen nineteen twenty thirty forty fifty "
           "sixty seventy eighty ninety hundred thousand million billion trillion",
}


def load(z, name):
    return json.loads(gzip.decompress(z.read("spacy_lookups_data/data/" + name)))


def doubles_final(word):
    vowels = "aeiou"
    return (len(word) >= 3 and word[-1] not in vowels + "wxy" and word[-2] in vowels
            and word[-3] not in vowels)


def regular_inflections(word, suffixes):
    out = set()
    for suf in suffixes:
        if suf == "s":
            if word.endswith(("s", "x", "z", "ch", "sh")):
                out.add(word + "es")
            elif word.endswith("y") and len(word) > 1 and word[-2] not in "aeiou":
                out.add(word[:-1] + "ies")
            else:
                out.add(word + "s")
        elif suf in ("ed", "er", "est") and doubles_final(word):
            out.add(word + word[-1] + suf)
            out.add(word + suf)
        elif suf in ("ed", "er", "est"):
            if word.endswith("e"):
                out.add(word + suf[1:])
            elif word.endswith("y") and len(word) > 1 and word[-2] not in "aeiou":
                out.add(word[:-1] + "i" + suf)
            else:
                out.add(word + suf)
        elif suf == "ing":
            out.add((word[:-1] if word.endswith("e") and not word.endswith("ee") else word) + "ing")
    return out


def main():
    wheel, out_path = sys.argv[1], sys.argv[2]
    z = zipfile.ZipFile(wheel)
    index = load(z, "en_lemma_index.json.gz")
    exc = load(z, "en_lemma_exc.json.gz")
    prob = load(z, "en_lexeme_prob.json.gz")

    forms = {pos: set() for pos in ("noun", "verb", "adj", "adv")}
    for pos, lemmas in index.items():
        for lemma in lemmas:
            if "_" in lemma:
                continue
            forms[pos].add(lemma)
    for pos, table in exc.items():
        forms[pos].update(k for k in table if "_" not in k)
    for lemma in list(index["noun"]):
        forms["noun"] |= regular_inflections(lemma, ["s"])
    index = {pos: set(lemmas) for pos, lemmas in index.items()}
    irregular_verb = {k for k in exc["verb"] if "_" not in k and k not in index["verb"]}
    past_forms = set()
    for lemma in list(index["verb"]):
        if len(lemma) >= 3:
            past_forms |= regular_inflections(lemma, ["ed"])
        forms["verb"] |= regular_inflections(lemma, ["s", "ed", "ing"])
    past_forms -= set(index["verb"])
    for lemma in list(index["adj"]):
        if len(lemma) <= 6:
            forms["adj"] |= regular_inflections(lemma, ["er", "est"])

    closed = {}
    for tag, words in CLOSED.items():
        for w in words.split():
            closed.setdefault(w, tag)

    def open_tag(w):
        noun, verb = w in forms["noun"], w in forms["verb"]
        adj, adv = w in forms["adj"], w in forms["adv"]
        # Inflected verb forms: irregular ones are verbs outright, regular
        # past forms are verbs unless they double as nouns.
        if (w in irregular_verb and w not in index["adj"]) or (w in past_forms and not noun):
            return "VERB"
        if adj:
            return "ADJ"
        if noun:
            return "NOUN"
        if verb:
            return "VERB"
        if adv:
            return "ADV"
        return None

    ranked = sorted(
        ((w, p) for w, p in prob.items() if w.isalpha() and w.islower() and w.isascii()),
        key=lambda item: (-item[1], item[0]),
    )
    entries = dict(closed)
    for w, _ in ranked:
        if len(entries) >= LIMIT:
            break
        if w in entries:
            continue
        tag = open_tag(w)
        if tag is not None:
            entries[w] = tag

    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        for w in sorted(entries):
            f.write(f"{w}\t{entries[w]}\n")
    print(f"wrote {len(entries)} entries to {out_path}")


if __name__ == "__main__":
    main()
