#!/usr/bin/env python3
"""Convert ARC records to the canonical format; numeric choice labels become letters."""
import argparse
import json
import sys

NUMERIC = {"1": "A", "2": "B", "3": "C", "4": "D", "5": "E"}


def convert_line(line):
    rec = json.loads(line)
    q = rec["question"]
    options = []
    for c in q["choices"]:
        label = c["label"].strip()
        options.append({"label": NUMERIC.get(label, label.upper()), "text": c["text"]})
    gold = rec.get("answerKey")
    if gold:
        gold = NUMERIC.get(gold.strip(), gold.strip().upper())
    return {"id": str(rec.get("id", "")), "stem": q["stem"], "options": options, "gold": gold or None}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("input", help="ARC JSONL file")
    ap.add_argument("-o", "--output", default="-", help="output path (default stdout)")
    args = ap.parse_args()

    out = sys.stdout if args.output == "-" else open(args.output, "w")
    with open(args.input) as f:
        for line in f:
            if line.strip():
                out.write(json.dumps(convert_line(line)) + "\n")
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()
