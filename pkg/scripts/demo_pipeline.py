#!/usr/bin/env python3
"""End-to-end demo: generate languages, train, and render a report.

Drives the command-line interface exactly as a shell script would, but
in-process so a single interpreter run covers the whole pipeline:

    synth-gen -> tokenizer-train -> run -> langid-train -> contamination -> report
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from langshift.cli import OUT_ENV, main as cli


def step(name, argv):
    print(f"== {name}: langshift {' '.join(argv)}", flush=True)
    code = cli(argv)
    if code != 0:
        raise SystemExit(f"{name} failed with exit code {code}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--manifest", default=os.path.join(os.path.dirname(__file__), "demo.toml"))
    ap.add_argument("--out", default="demo_out", help="output root for every artifact")
    ap.add_argument("--workers", type=int, default=2)
    args = ap.parse_args()

    out = os.path.abspath(args.out)
    os.environ[OUT_ENV] = out
    langid = os.path.join(out, "langid.npz")

    step("synth-gen", ["synth-gen", "--manifest", args.manifest])
    step("tokenizer-train", ["tokenizer-train", "--manifest", args.manifest])
    step("run", ["run", "--manifest", args.manifest, "--workers", str(args.workers)])
    step("langid-train", ["langid-train", "--manifest", args.manifest, "--out", langid])
    step("contamination", ["contamination", "--manifest", args.manifest, "--model", langid,
                           "--out", os.path.join(out, "contamination.csv")])
    step("report", ["report", "--runs", out, "--out", os.path.join(out, "report")])

    print(f"done; open {os.path.join(out, 'report', 'index.md')}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
