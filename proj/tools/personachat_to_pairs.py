#!/usr/bin/env python3
"""Convert PersonaChat (no-persona track) into prembed inputs.

The data is not downloaded here. Obtain it through ParlAI, whose
`personachat` task fetches an archive containing, among others:

    personachat/train_none_original.txt
    personachat/test_none_original.txt
    personachat/valid_none_original.txt

e.g. `pip install parlai && parlai display_data -t personachat:none`
populates `<ParlAI data dir>/Persona-Chat/personachat/`.

Each line of those files is

    <n> <query>\t<reply>\t\t<cand_1>|<cand_2>|...|<cand_20>

with <n> restarting at 1 for every dialogue. Training lines become one
(query, reply) pair each; evaluation lines become one candidate set with
the gold reply graded 1 and the other candidates graded 0. Only the current
query is kept (single-turn).

Usage:
    personachat_to_pairs.py <personachat dir> <out dir>

writes <out dir>/train.tsv, <out dir>/valid.jsonl and <out dir>/test.jsonl,
the layout the acceptance binary reads from PERSONACHAT_DIR.
"""

import argparse
import json
import pathlib
import sys


def parse_line(line):
    line = line.rstrip("\n")
    _, _, rest = line.partition(" ")
    fields = rest.split("\t")
    if len(fields) < 2:
        return None
    query, reply = fields[0].strip(), fields[1].strip()
    candidates = fields[3].split("|") if len(fields) > 3 and fields[3] else []
    return query, reply, candidates


def clean(text):
    return " ".join(text.replace("\t", " ").split())


def write_pairs(src, dst):
    n = 0
    with src.open(encoding="utf-8") as fin, dst.open("w", encoding="utf-8") as fout:
        for line in fin:
            parsed = parse_line(line)
            if parsed is None:
                continue
            query, reply, _ = parsed
            if query.startswith("__SILENCE__") or not query or not reply:
                continue
            fout.write(f"{clean(query)}\t{clean(reply)}\n")
            n += 1
    return n


def write_sets(src, dst):
    n = 0
    with src.open(encoding="utf-8") as fin, dst.open("w", encoding="utf-8") as fout:
        for line in fin:
            parsed = parse_line(line)
            if parsed is None:
                continue
            query, reply, candidates = parsed
            if not candidates or query.startswith("__SILENCE__"):
                continue
            gold = clean(reply)
            sets = [{"text": clean(c), "grade": int(clean(c) == gold)} for c in candidates]
            if sum(c["grade"] for c in sets) != 1:
                continue
            fout.write(json.dumps({"query": clean(query), "candidates": sets}) + "\n")
            n += 1
    return n


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("personachat_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    args = ap.parse_args()

    src = args.personachat_dir
    needed = ["train_none_original.txt", "valid_none_original.txt", "test_none_original.txt"]
    missing = [f for f in needed if not (src / f).exists()]
    if missing:
        sys.exit(f"missing {', '.join(missing)} in {src}; see the module docstring for where to get them")

    args.out_dir.mkdir(parents=True, exist_ok=True)
    pairs = write_pairs(src / "train_none_original.txt", args.out_dir / "train.tsv")
    valid = write_sets(src / "valid_none_original.txt", args.out_dir / "valid.jsonl")
    test = write_sets(src / "test_none_original.txt", args.out_dir / "test.jsonl")
    print(f"train pairs {pairs}, valid sets {valid}, test sets {test}")


if __name__ == "__main__":
    main()
