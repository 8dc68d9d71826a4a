#!/usr/bin/env python3
"""Cut a small WNDB subset (index.noun, index.verb, noun.exc, verb.exc) out of a
full WordNet 3.0 dict directory.

The subset keeps every index line needed to resolve the listed vocabulary the
same way the full database would: the words themselves, the base forms named
by their exception entries, and every suffix-rule candidate that exists in the
full index. The Princeton license header is copied verbatim.

usage: wordnet_subset.py <wordnet-dict-dir> <out-dir> <vocab-file>
"""
import os
import sys

RULES = {
    "noun": [("s", ""), ("ses", "s"), ("xes", "x"), ("zes", "z"), ("ches", "ch"),
             ("shes", "sh"), ("men", "man"), ("ies", "y")],
    "verb": [("s", ""), ("ies", "y"), ("es", "e"), ("es", ""), ("ed", "e"),
             ("ed", ""), ("ing", "e"), ("ing", "")],
}


def read_index(path):
    header, entries = [], {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("  "):
                header.append(line)
                continue
            entries[line.split(" ", 1)[0]] = line
    return header, entries


def read_exc(path):
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if len(parts) >= 2:
                out[parts[0]] = line
    return out


def main():
    src, dst, vocab_path = sys.argv[1:4]
    with open(vocab_path, encoding="utf-8") as f:
        vocab = [w.strip().lower() for w in f if w.strip() and not w.startswith("#")]
    os.makedirs(dst, exist_ok=True)
    for pos in ("noun", "verb"):
        header, index = read_index(os.path.join(src, f"index.{pos}"))
        exc = read_exc(os.path.join(src, f"{pos}.exc"))
        keep_index, keep_exc = set(), set()
        for word in vocab:
            if word in index:
                keep_index.add(word)
            if word in exc:
                keep_exc.add(word)
                for base in exc[word].split()[1:]:
                    if base in index:
                        keep_index.add(base)
            for suffix, repl in RULES[pos]:
                if word.endswith(suffix):
                    cand = word[: len(word) - len(suffix)] + repl
                    if cand in index:
                        keep_index.add(cand)
        with open(os.path.join(dst, f"index.{pos}"), "w", encoding="utf-8") as f:
            f.writelines(header)
            f.writelines(index[w] for w in sorted(keep_index))
        with open(os.path.join(dst, f"{pos}.exc"), "w", encoding="utf-8") as f:
            f.writelines(exc[w] for w in sorted(keep_exc))


if __name__ == "__main__":
    main()
