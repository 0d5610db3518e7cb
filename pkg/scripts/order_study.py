#!/usr/bin/env python3
"""Order study at desk scale, straight through the library API.

Builds a family of languages whose lexical overlap with a shared root is
graded, trains every continuation order that starts from the root, and
summarizes where each order lands: the transfer matrix, the cumulative
loss ranking, and how token distribution similarity lines up with the
loss the root suffers after each continuation.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from langshift.bpe import train_bpe
from langshift.corpus import SyntheticLanguageSpec, gen_synthetic_language, make_splits, pack_eval
from langshift.model import get_preset
from langshift.numerics import RngState
from langshift.shiftmetrics import tds
from langshift.trainer import StageSpec, enumerate_plans, run_plan
from langshift.transfer_analysis import (
    ReportBundle,
    backward_series,
    build_transfer_matrix,
    cumulative_loss,
    emit_report,
)


def build_family(overlaps, n_docs, seed):
    """Root plus one child per overlap grade, all from the root's alphabet."""
    base = dict(n_words=1500, alphabet="abcdef", n_docs=n_docs, doc_len_mean=60.0)
    rng = RngState(seed)
    langs = {}
    root = gen_synthetic_language(SyntheticLanguageSpec(name="root", **base), rng.child("root"))
    langs["root"] = root
    for alpha in overlaps:
        name = f"a{int(round(alpha * 100)):02d}"
        spec = SyntheticLanguageSpec(name=name, lexical_overlap=alpha, parent="root", **base)
        langs[name] = gen_synthetic_language(spec, rng.child(name), others={"root": root})
    return langs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="order_study_out")
    ap.add_argument("--overlaps", default="0.2,0.5,0.8")
    ap.add_argument("--steps", type=int, default=40)
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    overlaps = [float(s) for s in args.overlaps.split(",")]
    langs = build_family(overlaps, args.docs, args.seed)
    corpora = {name: lang.corpus for name, lang in langs.items()}

    texts = [doc.text for corpus in corpora.values() for doc in corpus.documents()]
    vocab = train_bpe(texts, 400)

    model = get_preset("pico", vocab_size=vocab.size)
    template = StageSpec(language="", steps=args.steps, batch_size=4,
                         max_lr=1e-3, min_lr=1e-4, warmup_steps=5, tail_steps=8)

    train, test = {}, {}
    for name, corpus in corpora.items():
        rng = RngState(args.seed).child(f"splits:{name}")
        train[name], _, test[name] = make_splits(corpus, rng, {"val": 0, "test": 16})
    testsets = {name: pack_eval(c, vocab, model.seq_len + 1) for name, c in test.items()}

    others = sorted(n for n in langs if n != "root")
    plans = enumerate_plans("root", others, model, template, seed=args.seed)
    print(f"running {len(plans)} plans ({args.steps} steps/stage)", flush=True)
    records = []
    for plan in plans:
        sub = {n: train[n] for n in plan.languages}
        result = run_plan(plan, sub, vocab, {n: testsets[n] for n in plan.languages},
                          outdir=os.path.join(args.out, plan.plan_id))
        records.extend(result.records)
        final = result.records[-1]
        print(f"  {plan.plan_id:30s} root loss {final.losses['root']:.3f}")

    matrix = build_transfer_matrix(records)
    print("\ntransfer matrix (rows = plans, final-stage losses):")
    print(matrix.to_csv())

    print("cumulative loss, best order first:")
    for plan_id, total in sorted(cumulative_loss(records).items(), key=lambda kv: kv[1]):
        print(f"  {plan_id:30s} {total:.3f}")

    print("\nsimilarity to root vs root's loss growth after one more stage:")
    series = backward_series(records, language="root")["root"]
    suffix1 = dict()
    for rec in records:
        if rec.stage_index == 2 and len(rec.plan_id.split("-")) == 2:
            suffix1[rec.plan_id.split("-")[1]] = rec.losses["root"]
    rng = RngState(args.seed).child("tds")
    for name in others:
        sim = tds(corpora["root"], corpora[name], vocab, n_samples=150, rng=rng)
        note = f"root loss {suffix1[name]:.3f} after root-{name}" if name in suffix1 else ""
        print(f"  tds(root, {name}) = {sim:.3f}  {note}")
    print(f"\nbackward series for root: {[(s, round(m, 3)) for s, m, _ in series]}")

    files = emit_report(ReportBundle(title="order study", matrix=matrix,
                                     backward=backward_series(records),
                                     cumulative=cumulative_loss(records)),
                        os.path.join(args.out, "report"))
    print(f"report: {len(files)} files under {os.path.join(args.out, 'report')}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
