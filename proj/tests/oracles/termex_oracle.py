#!/usr/bin/env python3
"""Independent reference for corpus building.

Reimplements tokenization, the rule tagger, lemmatization and term
extraction from their written rules and prints the expected corpus lines.

usage: termex_oracle.py LEXICON STORIES > expected.jsonl
"""

import json
import string
import sys

DETERMINERS = set("the a an this that these those his her my your our their its some any every each no "
                  "another all both many few several".split())
SUBJECTS = set("he she it they we i you who".split())
VERB_CUES = set("to will would can could should may might must did do does not never then didn't don't won't".split())
OTHER_CLOSED = set(
    "him them us me what which there on in at to of for with from by into onto over under up down out off about "
    "after before through across around near behind and or but so because then when while as if than is are was "
    "were be been being am has have had do does did will would can could should may might must not very too also "
    "just back away again never all both himself herself themselves didn't don't won't wasn't".split())
IRREGULAR = dict(pair.split(":") for pair in (
    "sat:sit went:go gone:go ran:run saw:see seen:see took:take taken:take made:make got:get came:come "
    "threw:throw thrown:throw ate:eat eaten:eat drank:drink slept:sleep bought:buy found:find left:leave "
    "rode:ride ridden:ride stood:stand sold:sell gave:give given:give brought:bring caught:catch fell:fall "
    "fallen:fall felt:feel kept:keep lay:lie sang:sing swam:swim wrote:write drove:drive began:begin built:build "
    "told:tell thought:think met:meet won:win lost:lose flew:fly hid:hide held:hold heard:hear knew:know paid:pay "
    "read:read said:say sent:send spent:spend taught:teach woke:wake wore:wear climbed:climb dug:dig fed:feed"
).split())
VOWELS = "aeiou"
MAX_TERMS = 8
MAX_TOKENS = 24


def load_lexicon(path):
    frames, nouns = {}, set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if cols[0] == "F":
                frames[cols[1]] = {lu.strip().lower() for lu in cols[3].split(",") if lu.strip()}
            elif cols[0] == "N":
                nouns.add(cols[1])
    lus = {}
    for name, units in frames.items():
        for lu in units:
            lus.setdefault(lu, set()).add(name)
    return frames, nouns, lus


def tokenize(text):
    s = "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in text)
    out, cur = [], ""
    for i, c in enumerate(s):
        if c in " \t\n\r\f\v":
            if cur:
                out.append(cur)
            cur = ""
        elif c in string.punctuation:
            nxt = s[i + 1] if i + 1 < len(s) else ""
            if c in "'-" and cur and (nxt.isascii() and nxt.isalnum() or (nxt and ord(nxt) >= 0x80)):
                cur += c
            else:
                if cur:
                    out.append(cur)
                cur = ""
                out.append(c)
        else:
            cur += c
    if cur:
        out.append(cur)
    return out


def add(lst, x):
    if x and x not in lst:
        lst.append(x)


def verb_candidates(w):
    out = []
    if w in IRREGULAR:
        add(out, IRREGULAR[w])
    add(out, w)

    def ends(suf):
        return len(w) > len(suf) and w.endswith(suf)

    def doubled(s):
        return len(s) >= 2 and s[-1] == s[-2] and s[-1] not in VOWELS and "a" <= s[-1] <= "z"

    if ends("ies"):
        add(out, w[:-3] + "y")
    if ends("es"):
        add(out, w[:-2])
    if ends("s") and not ends("ss"):
        add(out, w[:-1])
    if ends("ied"):
        add(out, w[:-3] + "y")
    if ends("ed"):
        s = w[:-2]
        add(out, s)
        add(out, w[:-1])
        if doubled(s):
            add(out, s[:-1])
    if ends("ing"):
        s = w[:-3]
        add(out, s)
        add(out, s + "e")
        if doubled(s):
            add(out, s[:-1])
    return out


def verb_lemma(lus, w):
    return next((c for c in verb_candidates(w) if c in lus), None)


def noun_lemma(nouns, w):
    if w in nouns:
        return w
    cands = []
    if len(w) > 3 and w.endswith("ies"):
        cands.append(w[:-3] + "y")
    if len(w) > 2 and w.endswith("es"):
        cands.append(w[:-2])
    if len(w) > 1 and w.endswith("s") and not w.endswith("ss"):
        cands.append(w[:-1])
    return next((c for c in cands if c in nouns), None)


def tag(nouns, lus, tokens):
    tags = []
    for i, tok in enumerate(tokens):
        alpha = tok and ("a" <= tok[0] <= "z" or ord(tok[0]) >= 0x80)
        if not alpha or tok in DETERMINERS or tok in SUBJECTS or tok in OTHER_CLOSED:
            tags.append(("o", tok))
            continue
        v, n = verb_lemma(lus, tok), noun_lemma(nouns, tok)
        if v and not n:
            tags.append(("v", v))
        elif n and not v:
            tags.append(("n", n))
        elif n and v:
            prev = tokens[i - 1] if i > 0 else ""
            if prev in DETERMINERS:
                as_noun = True
            elif prev in SUBJECTS or prev in VERB_CUES:
                as_noun = False
            else:
                as_noun = n == tok
            tags.append(("n", n) if as_noun else ("v", v))
        else:
            tags.append(("o", tok))
    return tags


def choose_frame(frames, names):
    return min(sorted(names), key=lambda name: len(frames[name]))


def extract(frames, nouns, lus, tokens):
    out = []
    for pos, lemma in tag(nouns, lus, tokens):
        term = None
        if pos == "n" and lemma in nouns:
            term = lemma
        elif pos == "v" and lemma in lus:
            term = "f:" + choose_frame(frames, lus[lemma])
        if term and term not in out and len(out) < MAX_TERMS:
            out.append(term)
    return out


def main():
    frames, nouns, lus = load_lexicon(sys.argv[1])
    with open(sys.argv[2], encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            sentences = [tokenize(s) for s in json.loads(line)["sentences"]]
            if len(sentences) != 5 or any(not s or len(s) > MAX_TOKENS for s in sentences):
                continue
            terms = [extract(frames, nouns, lus, s) for s in sentences]
            if not any(terms):
                continue
            print(json.dumps({"terms": terms, "sentences": sentences}, separators=(",", ":"), ensure_ascii=False))


if __name__ == "__main__":
    main()
