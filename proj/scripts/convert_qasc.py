#!/usr/bin/env python3
"""Convert qasc records (question/choices/answerKey JSONL) to the canonical format."""
import argparse
import json
import sys


def convert_line(line):
    rec = json.loads(line)
    q = rec["question"]
    options = [{"label": c["label"].upper(), "text": c["text"]} for c in q["choices"]]
    return {
        "id": str(rec.get("id", "")),
        "stem": q["stem"],
        "options": options,
        "gold": rec.get("answerKey") or None,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("input", help="qasc JSONL file")
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
