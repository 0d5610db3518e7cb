"""Command-line front end.

One experiment manifest (TOML) declares languages, tokenizer, model, stage
template, plans, seeds, and metric settings; the subcommands bind the
library modules into a reproducible pipeline around it. Exit codes: 0 on
success, 1 for validation and input problems, 2 for runtime failures.
Progress goes to standard error, results to standard output or files.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 has no stdlib TOML reader
    import tomli as tomllib

from . import bpe
from .corpus import (
    CorpusSpec,
    DatasetSpec,
    LanguageCorpus,
    SyntheticLanguage,
    SyntheticLanguageSpec,
    gen_synthetic_language,
    load_corpus,
    make_splits,
    pack_eval,
    read_jsonl_documents,
    save_corpus_jsonl,
    save_ground_truth,
    single_dataset_corpus,
)
from .errors import ConfigError, InputError
from .model import ModelConfig, get_preset
from .numerics import RngState
from .shiftmetrics import (
    LangIdConfig,
    contamination_matrix,
    load_feature_distances,
    load_langid,
    save_langid,
    tds,
    train_langid,
)
from .trainer import (
    ExperimentPlan,
    StageSpec,
    TransferRecord,
    enumerate_plans,
    load_checkpoint,
    run_plan,
)
from .transfer_analysis import (
    ReportBundle,
    backward_series,
    build_factor_table,
    build_transfer_matrix,
    correlate,
    cumulative_loss,
    emit_report,
    eval_loss,
    forgetting_tradeoff,
    forward_transfer,
    is_joint,
    load_reference_losses,
    plan_languages,
)

OUT_ENV = "LANGSHIFT_OUT"
RECORDS_SCHEMA = "langshift-records/v1"


def _log(msg: str) -> None:
    print(f"[langshift] {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class RealLanguage:
    name: str
    spec: CorpusSpec


@dataclass
class SyntheticEntry:
    name: str
    spec: SyntheticLanguageSpec
    seed: int


@dataclass
class Manifest:
    """Validated experiment description with defaults applied."""

    path: str
    base_dir: str
    languages: list[RealLanguage | SyntheticEntry]
    vocab_size: int
    tokenizer_corpora: list[str]
    model: ModelConfig
    template: StageSpec
    plan_mode: str
    first: str | None
    others: list[str]
    sequences: list[list[str]]
    eval_every: int | None
    seeds: list[int]
    out_dir: str
    val_docs: int
    test_docs: int
    tds_samples: int
    tds_unit: str
    distance_file: str | None
    langid: LangIdConfig

    def language_names(self) -> list[str]:
        return [entry.name for entry in self.languages]


def _want(table: dict, key: str, types, where: str, default=None, required: bool = False):
    if key not in table:
        if required:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    value = table[key]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{where}.{key}: expected {types}, got a boolean")
    if not isinstance(value, types):
        raise ConfigError(f"{where}.{key}: expected {getattr(types, '__name__', types)}, got {type(value).__name__}")
    return value


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")


_MODEL_KEYS = {"preset", "n_layers", "d_model", "n_heads", "seq_len", "vocab_size", "tied_output", "init_std"}
_STAGE_KEYS = {"steps", "batch_size", "max_lr", "min_lr", "warmup_steps", "tail_steps"}
_LANGID_KEYS = {"ngram_min", "ngram_max", "hash_dim", "max_chars", "epochs", "lr", "holdout_fraction"}
_SYNTH_KEYS = {
    "name", "kind", "seed", "n_words", "zipf_exponent", "alphabet", "word_len_min",
    "word_len_max", "lexical_overlap", "parent", "contamination_rate", "contaminant",
    "bigram_temperature", "successor_fanout", "n_docs", "doc_len_mean", "doc_len_min",
}


def parse_manifest(path) -> Manifest:
    """Read and fully validate a TOML experiment manifest.

    Unknown keys are rejected by name; dataset paths must exist; the
    defaults documented in the README fill every optional section.
    """
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))
    _reject_unknown(
        raw,
        {"out_dir", "seed", "seeds", "languages", "tokenizer", "model", "stage", "plan", "splits", "metrics"},
        "manifest",
    )

    languages: list[RealLanguage | SyntheticEntry] = []
    seen = set()
    raw_langs = _want(raw, "languages", list, "manifest", required=True)
    if not raw_langs:
        raise ConfigError("manifest.languages: need at least one language")
    top_seed = _want(raw, "seed", int, "manifest", default=0)
    for i, entry in enumerate(raw_langs):
        where = f"languages[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected a table")
        name = _want(entry, "name", str, where, required=True)
        if name in seen:
            raise ConfigError(f"{where}.name: duplicate language {name!r}")
        seen.add(name)
        kind = _want(entry, "kind", str, where, default="real")
        if kind == "real":
            _reject_unknown(entry, {"name", "kind", "datasets"}, where)
            raw_sets = _want(entry, "datasets", list, where, required=True)
            if not raw_sets:
                raise ConfigError(f"{where}.datasets: need at least one dataset")
            datasets = []
            for j, ds in enumerate(raw_sets):
                dwhere = f"{where}.datasets[{j}]"
                if not isinstance(ds, dict):
                    raise ConfigError(f"{dwhere}: expected a table")
                _reject_unknown(ds, {"name", "path", "weight", "size", "category"}, dwhere)
                dpath = _want(ds, "path", str, dwhere, required=True)
                full = dpath if os.path.isabs(dpath) else os.path.join(base_dir, dpath)
                if not os.path.exists(full):
                    raise ConfigError(f"{dwhere}.path: no such file {full}")
                datasets.append(
                    DatasetSpec(
                        name=_want(ds, "name", str, dwhere, required=True),
                        path=full,
                        weight=float(_want(ds, "weight", (int, float), dwhere, required=True)),
                        # sampling mass is weight * size, so an unspecified
                        # size must not zero the dataset out
                        size=float(_want(ds, "size", (int, float), dwhere, default=1.0)),
                        category=_want(ds, "category", str, dwhere, default=""),
                    )
                )
            spec = CorpusSpec(language=name, datasets=tuple(datasets))
            spec.validate()
            languages.append(RealLanguage(name=name, spec=spec))
        elif kind == "synthetic":
            _reject_unknown(entry, _SYNTH_KEYS, where)
            kwargs = {}
            for key, types in (
                ("n_words", int), ("zipf_exponent", (int, float)), ("alphabet", str),
                ("word_len_min", int), ("word_len_max", int), ("lexical_overlap", (int, float)),
                ("parent", str), ("contamination_rate", (int, float)), ("contaminant", str),
                ("bigram_temperature", (int, float)), ("successor_fanout", int),
                ("n_docs", int), ("doc_len_mean", (int, float)), ("doc_len_min", int),
            ):
                if key in entry:
                    value = _want(entry, key, types, where)
                    kwargs[key] = float(value) if types == (int, float) else value
            spec = SyntheticLanguageSpec(name=name, **kwargs)
            spec.validate()
            lang_seed = _want(entry, "seed", int, where, default=None)
            if lang_seed is None:
                lang_seed = RngState(top_seed).child(f"lang:{name}").seed
            languages.append(SyntheticEntry(name=name, spec=spec, seed=lang_seed))
        else:
            raise ConfigError(f"{where}.kind: expected 'real' or 'synthetic', got {kind!r}")

    tok = _want(raw, "tokenizer", dict, "manifest", default={})
    _reject_unknown(tok, {"vocab_size", "corpora"}, "tokenizer")
    vocab_size = _want(tok, "vocab_size", int, "tokenizer", default=512)
    tok_corpora = _want(tok, "corpora", list, "tokenizer", default=[e.name for e in languages])
    for lang in tok_corpora:
        if lang not in seen:
            raise ConfigError(f"tokenizer.corpora: unknown language {lang!r}")

    mdl = _want(raw, "model", dict, "manifest", default={})
    _reject_unknown(mdl, _MODEL_KEYS, "model")
    preset = _want(mdl, "preset", str, "model", default="nano")
    overrides = {}
    for key in _MODEL_KEYS - {"preset"}:
        if key in mdl:
            types = bool if key == "tied_output" else (int, float) if key == "init_std" else int
            value = _want(mdl, key, types, "model")
            overrides[key] = float(value) if key == "init_std" else value
    overrides.setdefault("vocab_size", vocab_size)
    model = get_preset(preset, **overrides)

    stg = _want(raw, "stage", dict, "manifest", default={})
    _reject_unknown(stg, _STAGE_KEYS, "stage")
    template = StageSpec(
        language="",
        steps=_want(stg, "steps", int, "stage", default=100),
        batch_size=_want(stg, "batch_size", int, "stage", default=8),
        max_lr=float(_want(stg, "max_lr", (int, float), "stage", default=1e-3)),
        min_lr=float(_want(stg, "min_lr", (int, float), "stage", default=1e-4)),
        warmup_steps=_want(stg, "warmup_steps", int, "stage", default=10),
        tail_steps=_want(stg, "tail_steps", int, "stage", default=10),
    )

    pl = _want(raw, "plan", dict, "manifest", default={})
    _reject_unknown(pl, {"mode", "first", "others", "sequences", "eval_every"}, "plan")
    plan_mode = _want(pl, "mode", str, "plan", default="enumerate")
    if plan_mode not in ("enumerate", "explicit", "joint"):
        raise ConfigError(f"plan.mode: expected enumerate, explicit, or joint, got {plan_mode!r}")
    first = _want(pl, "first", str, "plan", default=None)
    others = _want(pl, "others", list, "plan", default=[])
    sequences = _want(pl, "sequences", list, "plan", default=[])
    eval_every = _want(pl, "eval_every", int, "plan", default=None)
    if plan_mode in ("enumerate", "joint"):
        if first is None:
            first = languages[0].name
        if not others:
            others = [e.name for e in languages if e.name != first]
        if first in others:
            raise ConfigError(f"plan.first: {first!r} also appears in plan.others")
        for lang in [first] + others:
            if lang not in seen:
                raise ConfigError(f"plan: unknown language {lang!r}")
    if plan_mode == "explicit":
        if not sequences:
            raise ConfigError("plan.sequences: explicit mode needs at least one sequence")
        for j, seq in enumerate(sequences):
            if not isinstance(seq, list) or not seq or not all(isinstance(s, str) for s in seq):
                raise ConfigError(f"plan.sequences[{j}]: expected a non-empty list of language names")
            for lang in seq:
                if lang not in seen:
                    raise ConfigError(f"plan.sequences[{j}]: unknown language {lang!r}")
            if len(set(seq)) != len(seq):
                raise ConfigError(f"plan.sequences[{j}]: duplicate language")

    seeds = _want(raw, "seeds", list, "manifest", default=None)
    if seeds is None:
        seeds = [top_seed]
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("manifest.seeds: expected a non-empty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("manifest.seeds: duplicate seed")

    spl = _want(raw, "splits", dict, "manifest", default={})
    _reject_unknown(spl, {"val", "test"}, "splits")
    val_docs = _want(spl, "val", int, "splits", default=0)
    test_docs = _want(spl, "test", int, "splits", default=16)
    if test_docs < 1:
        raise ConfigError("splits.test: need at least one test document per language")

    met = _want(raw, "metrics", dict, "manifest", default={})
    _reject_unknown(met, {"tds_samples", "tds_unit", "distance_file", "langid"}, "metrics")
    tds_samples = _want(met, "tds_samples", int, "metrics", default=200)
    tds_unit = _want(met, "tds_unit", str, "metrics", default="documents")
    if tds_unit not in ("documents", "sequences"):
        raise ConfigError(f"metrics.tds_unit: expected documents or sequences, got {tds_unit!r}")
    distance_file = _want(met, "distance_file", str, "metrics", default=None)
    if distance_file is not None:
        if not os.path.isabs(distance_file):
            distance_file = os.path.join(base_dir, distance_file)
        if not os.path.exists(distance_file):
            raise ConfigError(f"metrics.distance_file: no such file {distance_file}")
    lid = _want(met, "langid", dict, "metrics", default={})
    _reject_unknown(lid, _LANGID_KEYS, "metrics.langid")
    base = LangIdConfig()
    langid = LangIdConfig(
        ngram_min=_want(lid, "ngram_min", int, "metrics.langid", default=base.ngram_min),
        ngram_max=_want(lid, "ngram_max", int, "metrics.langid", default=base.ngram_max),
        hash_dim=_want(lid, "hash_dim", int, "metrics.langid", default=base.hash_dim),
        max_chars=_want(lid, "max_chars", int, "metrics.langid", default=base.max_chars),
        epochs=_want(lid, "epochs", int, "metrics.langid", default=base.epochs),
        lr=float(_want(lid, "lr", (int, float), "metrics.langid", default=base.lr)),
        holdout_fraction=float(
            _want(lid, "holdout_fraction", (int, float), "metrics.langid", default=base.holdout_fraction)
        ),
    )
    langid.validate()

    out_dir = _want(raw, "out_dir", str, "manifest", default=None)
    if out_dir is None:
        out_dir = os.environ.get(OUT_ENV, ".")
    elif not os.path.isabs(out_dir):
        out_dir = os.path.join(base_dir, out_dir)

    return Manifest(
        path=str(path),
        base_dir=base_dir,
        languages=languages,
        vocab_size=vocab_size,
        tokenizer_corpora=list(tok_corpora),
        model=model,
        template=template,
        plan_mode=plan_mode,
        first=first,
        others=list(others),
        sequences=[list(s) for s in sequences],
        eval_every=eval_every,
        seeds=list(seeds),
        out_dir=out_dir,
        val_docs=val_docs,
        test_docs=test_docs,
        tds_samples=tds_samples,
        tds_unit=tds_unit,
        distance_file=distance_file,
        langid=langid,
    )


def manifest_languages(manifest: Manifest) -> tuple[dict[str, LanguageCorpus], dict[str, SyntheticLanguage]]:
    """Materialize every language: load real corpora, generate synthetic ones.

    Synthetic languages resolve parents and contaminants among each other,
    in dependency order; each is generated from its own seed so a clone
    entry can reuse its parent's seed and reproduce it exactly.
    """
    corpora: dict[str, LanguageCorpus] = {}
    generated: dict[str, SyntheticLanguage] = {}
    pending = [e for e in manifest.languages if isinstance(e, SyntheticEntry)]
    for entry in manifest.languages:
        if isinstance(entry, RealLanguage):
            corpora[entry.name] = load_corpus(entry.spec, base_dir=manifest.base_dir)
    while pending:
        progressed = False
        for entry in list(pending):
            needs = {entry.spec.parent, entry.spec.contaminant} - {None}
            if not needs <= set(generated):
                missing = needs - set(generated)
                if not missing <= {e.name for e in pending}:
                    raise ConfigError(
                        f"language {entry.name}: depends on {sorted(missing)} "
                        "which are not synthetic languages in this manifest"
                    )
                continue
            lang = gen_synthetic_language(entry.spec, RngState(entry.seed), others=generated)
            generated[entry.name] = lang
            corpora[entry.name] = lang.corpus
            pending.remove(entry)
            progressed = True
        if not progressed:
            raise ConfigError(f"circular parent/contaminant references among {[e.name for e in pending]}")
    return corpora, generated


def manifest_plans(manifest: Manifest, seed: int) -> list[ExperimentPlan]:
    if manifest.plan_mode == "enumerate":
        return enumerate_plans(
            manifest.first,
            manifest.others,
            manifest.model,
            manifest.template,
            seed=seed,
            eval_every=manifest.eval_every,
        )
    if manifest.plan_mode == "joint":
        return [
            ExperimentPlan(
                mode="joint",
                languages=(manifest.first, *manifest.others),
                model=manifest.model,
                template=manifest.template,
                seed=seed,
                eval_every=manifest.eval_every,
            )
        ]
    plans = []
    for seq in manifest.sequences:
        plans.append(
            ExperimentPlan(
                mode="sequential",
                languages=tuple(seq),
                model=manifest.model,
                template=manifest.template,
                seed=seed,
                eval_every=manifest.eval_every,
            )
        )
    ids = [p.plan_id for p in plans]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"plan.sequences: duplicate plan {ids}")
    return plans


# ---------------------------------------------------------------------------
# Shared pipeline pieces


def _vocab_path(manifest: Manifest) -> str:
    return os.path.join(manifest.out_dir, "vocab.txt")


def _train_or_load_vocab(manifest: Manifest, corpora: dict[str, LanguageCorpus]) -> bpe.Vocab:
    path = _vocab_path(manifest)
    if os.path.exists(path):
        vocab = bpe.load_vocab(path)
        if vocab.size != manifest.model.vocab_size:
            raise ConfigError(
                f"{path}: cached vocabulary has {vocab.size} tokens, manifest wants {manifest.model.vocab_size}"
            )
        _log(f"vocab: loaded {path} ({vocab.size} tokens)")
        return vocab
    texts = []
    for lang in manifest.tokenizer_corpora:
        texts.extend(doc.text for doc in corpora[lang].documents())
    vocab = bpe.train_bpe(texts, manifest.vocab_size)
    os.makedirs(manifest.out_dir, exist_ok=True)
    bpe.save_vocab(vocab, path)
    _log(f"vocab: trained {vocab.size} tokens -> {path} (hash {bpe.vocab_hash(vocab)[:12]})")
    return vocab


def _split_corpora(manifest: Manifest, corpora: dict[str, LanguageCorpus], seed: int):
    """Per language: disjoint train/val/test corpora."""
    train, val, test = {}, {}, {}
    for name, corpus in corpora.items():
        rng = RngState(seed).child(f"splits:{name}")
        train[name], val[name], test[name] = make_splits(
            corpus, rng, {"val": manifest.val_docs, "test": manifest.test_docs}
        )
    return train, val, test


def _pack_testsets(manifest: Manifest, vocab: bpe.Vocab, test: dict[str, LanguageCorpus]):
    row_len = manifest.model.seq_len + 1
    return {name: pack_eval(corpus, vocab, row_len) for name, corpus in test.items()}


def _records_to_json(records: list[TransferRecord]) -> dict:
    return {
        "schema": RECORDS_SCHEMA,
        "records": [
            {
                "plan": r.plan_id,
                "stage": r.stage_index,
                "language": r.language,
                "losses": r.losses,
                "seed": r.seed,
            }
            for r in records
        ],
    }


def _records_from_json(blob: dict, origin: str) -> list[TransferRecord]:
    if blob.get("schema") != RECORDS_SCHEMA:
        raise InputError(f"{origin}: not a records file (schema {blob.get('schema')!r})")
    out = []
    for row in blob["records"]:
        out.append(
            TransferRecord(
                plan_id=row["plan"],
                stage_index=int(row["stage"]),
                language=row["language"],
                losses={k: float(v) for k, v in row["losses"].items()},
                seed=int(row.get("seed", 0)),
            )
        )
    return out


def _run_one_plan(manifest_path: str, plan_index: int, seed: int) -> str:
    """Worker entry: rebuild everything from the manifest and run one plan."""
    manifest = parse_manifest(manifest_path)
    corpora, _ = manifest_languages(manifest)
    vocab = _train_or_load_vocab(manifest, corpora)
    train, val, test = _split_corpora(manifest, corpora, seed)
    plans = manifest_plans(manifest, seed)
    plan = plans[plan_index]
    testsets = _pack_testsets(manifest, vocab, {n: test[n] for n in plan.languages})
    val_rows = None
    if manifest.eval_every and manifest.val_docs:
        row_len = manifest.model.seq_len + 1
        val_rows = {n: pack_eval(val[n], vocab, row_len) for n in plan.languages}
    plan_dir = os.path.join(manifest.out_dir, f"{plan.plan_id}.s{seed}")
    os.makedirs(plan_dir, exist_ok=True)
    result = run_plan(
        plan,
        {n: train[n] for n in plan.languages},
        vocab,
        testsets,
        outdir=plan_dir,
        val_sets=val_rows,
        log=_log,
    )
    with open(os.path.join(plan_dir, "records.json"), "w", encoding="utf-8") as f:
        json.dump(_records_to_json(result.records), f, indent=2, sort_keys=True)
        f.write("\n")
    return plan_dir


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_tokenizer_train(args) -> int:
    manifest = parse_manifest(args.manifest)
    corpora, _ = manifest_languages(manifest)
    if os.path.exists(_vocab_path(manifest)):
        os.remove(_vocab_path(manifest))
    vocab = _train_or_load_vocab(manifest, corpora)
    print(bpe.vocab_hash(vocab))
    return 0


def _cmd_synth_gen(args) -> int:
    manifest = parse_manifest(args.manifest)
    outdir = args.out or os.path.join(manifest.out_dir, "synthetic")
    _, generated = manifest_languages(manifest)
    if not generated:
        raise InputError("manifest has no synthetic languages")
    os.makedirs(outdir, exist_ok=True)
    for name, lang in sorted(generated.items()):
        corpus_path = os.path.join(outdir, f"{name}.jsonl")
        truth_path = os.path.join(outdir, f"{name}.truth.jsonl")
        save_corpus_jsonl(lang.corpus.documents(), corpus_path)
        save_ground_truth(lang.true_labels, truth_path)
        planted = sum(1 for t in lang.true_labels if t != name)
        _log(f"{name}: {lang.corpus.n_docs()} docs ({planted} contaminant) -> {corpus_path}")
    print(outdir)
    return 0


def _cmd_run(args) -> int:
    manifest = parse_manifest(args.manifest)
    os.makedirs(manifest.out_dir, exist_ok=True)
    corpora, _ = manifest_languages(manifest)
    _train_or_load_vocab(manifest, corpora)  # cache before any workers start
    jobs = []
    for seed in manifest.seeds:
        plans = manifest_plans(manifest, seed)
        for index, plan in enumerate(plans):
            if args.plan and plan.plan_id != args.plan:
                continue
            jobs.append((index, seed, plan.plan_id))
    if not jobs:
        raise InputError(f"no plan matches {args.plan!r}; have "
                         f"{[p.plan_id for p in manifest_plans(manifest, manifest.seeds[0])]}")
    _log(f"running {len(jobs)} plan runs with {args.workers} worker(s)")
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [
                pool.submit(_run_one_plan, manifest.path, index, seed)
                for index, seed, _ in jobs
            ]
            for fut in futures:
                _log(f"done: {fut.result()}")
    else:
        for index, seed, _ in jobs:
            _log(f"done: {_run_one_plan(manifest.path, index, seed)}")
    print(manifest.out_dir)
    return 0


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    vocab = bpe.load_vocab(args.vocab)
    docs = read_jsonl_documents(args.testset)
    if not docs:
        raise InputError(f"{args.testset}: no documents")
    corpus = single_dataset_corpus(docs[0].lang or "testset", docs)
    loss = eval_loss(ckpt.params, corpus, vocab)
    print(f"{loss:.6f}")
    return 0


def _cmd_tds(args) -> int:
    vocab = bpe.load_vocab(args.vocab)
    corpora = []
    for path in (args.a, args.b):
        docs = read_jsonl_documents(path)
        name = os.path.splitext(os.path.basename(path))[0]
        corpora.append(single_dataset_corpus(name, docs))
    value = tds(
        corpora[0],
        corpora[1],
        vocab,
        n_samples=args.samples,
        rng=RngState(args.seed),
        unit=args.unit,
        row_len=args.row_len,
    )
    print(f"{value:.6f}")
    return 0


def _cmd_langid_train(args) -> int:
    manifest = parse_manifest(args.manifest)
    corpora, _ = manifest_languages(manifest)
    model = train_langid(corpora, manifest.langid, RngState(args.seed))
    out = args.out or os.path.join(manifest.out_dir, "langid.npz")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    save_langid(model, out)
    _log(f"languages: {model.languages}")
    _log(f"train accuracy {model.train_accuracy:.4f}, holdout accuracy {model.holdout_accuracy:.4f}")
    print(out)
    return 0


def _cmd_contamination(args) -> int:
    manifest = parse_manifest(args.manifest)
    corpora, _ = manifest_languages(manifest)
    model = load_langid(args.model)
    matrix = contamination_matrix(corpora, model)
    text = matrix.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        print(args.out)
    else:
        print(text, end="")
    return 0


def _collect_run_records(runs_dir: str) -> list[TransferRecord]:
    records: list[TransferRecord] = []
    for entry in sorted(os.listdir(runs_dir)):
        path = os.path.join(runs_dir, entry, "records.json")
        if os.path.isfile(path):
            with open(path, "r", encoding="utf-8") as f:
                records.extend(_records_from_json(json.load(f), path))
    if not records:
        raise InputError(f"{runs_dir}: no */records.json underneath")
    return records


def _cmd_report(args) -> int:
    if bool(args.reference) == bool(args.runs):
        raise InputError("pass exactly one of --runs or --reference")
    if args.reference:
        records = load_reference_losses(args.reference)
        title = f"reference study ({args.reference})"
        languages = ["en", "da", "is", "no"]
    else:
        records = _collect_run_records(args.runs)
        title = f"runs under {os.path.basename(os.path.abspath(args.runs))}"
        languages = None
    matrix_records = [r for r in records if r.seed == args.seed] or records
    bundle = ReportBundle(title=title, matrix=build_transfer_matrix(matrix_records, languages))
    bundle.backward = backward_series(records)
    bundle.cumulative = cumulative_loss(matrix_records)

    baselines = {}
    for r in records:
        langs = plan_languages(r.plan_id)
        if len(langs) == 1 and not is_joint(r.plan_id) and langs[0] in r.losses:
            baselines[langs[0]] = r.losses[langs[0]]
    trained = {
        r.language
        for r in records
        if not is_joint(r.plan_id) and r.stage_index >= 2
    }
    if trained and trained <= set(baselines):
        try:
            bundle.forward = forward_transfer(records, baselines)
        except ValueError as exc:
            _log(f"forward transfer skipped: {exc}")
    else:
        _log("forward transfer skipped: no monolingual baseline for "
             f"{sorted(trained - set(baselines)) or 'any language'}")
    try:
        bundle.tradeoff = forgetting_tradeoff(records)
    except ValueError as exc:  # final-only records cannot place tradeoff points
        _log(f"forgetting trade-off skipped: {exc}")

    deltas = {}
    for r in matrix_records:
        langs = plan_languages(r.plan_id)
        if is_joint(r.plan_id) or len(langs) != 2 or r.stage_index != 2:
            continue
        a, b = langs
        before = None
        stage1 = [x for x in matrix_records if x.plan_id == r.plan_id and x.stage_index == 1]
        if stage1 and a in stage1[0].losses:
            before = stage1[0].losses[a]
        elif a in baselines:
            before = baselines[a]
        if before is not None and a in r.losses:
            deltas[(a, b)] = r.losses[a] - before
    if len(deltas) >= 3:
        try:
            distances = load_feature_distances(args.distances)
            factors = build_factor_table(sorted(deltas), distances)
            bundle.factors = factors
            bundle.correlations = correlate(deltas, factors)
        except (ValueError, KeyError) as exc:
            _log(f"factor correlation skipped: {exc}")
    files = emit_report(bundle, args.out, timestamp=args.timestamp)
    _log(f"{len(files)} artifacts -> {args.out}")
    print(args.out)
    return 0


def _cmd_enumerate(args) -> int:
    others = [s for s in args.others.split(",") if s]
    plans = enumerate_plans(
        args.first,
        others,
        get_preset("nano"),
        StageSpec(language="", steps=1, batch_size=1, max_lr=1e-3, min_lr=1e-4, warmup_steps=0, tail_steps=0),
    )
    for plan in plans:
        print(plan.plan_id)
    return 0


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langshift",
        description="Continual pre-training experiments under language shift.",
    )
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("tokenizer-train", help="train the byte-pair vocabulary from the manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_tokenizer_train)

    p = sub.add_parser("synth-gen", help="generate the manifest's synthetic languages to JSONL")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="output directory (default <out_dir>/synthetic)")
    p.set_defaults(func=_cmd_synth_gen)

    p = sub.add_parser("run", help="run the manifest's training plans")
    p.add_argument("--manifest", required=True)
    p.add_argument("--plan", default=None, help="run only this plan id")
    p.add_argument("--workers", type=int, default=1, help="parallel plan processes")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="mean test loss of a checkpoint on a JSONL testset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--testset", required=True)
    p.add_argument("--vocab", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tds", help="token distribution similarity of two JSONL corpora")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unit", choices=("documents", "sequences"), default="documents")
    p.add_argument("--row-len", type=int, default=None)
    p.set_defaults(func=_cmd_tds)

    p = sub.add_parser("langid-train", help="train the language identifier on the manifest's languages")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="model file (default <out_dir>/langid.npz)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_langid_train)

    p = sub.add_parser("contamination", help="classify every corpus and print the contamination matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="trained langid .npz")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_contamination)

    p = sub.add_parser("report", help="render tables, series, and plots from run records")
    p.add_argument("--runs", default=None, help="directory of plan run subdirectories")
    p.add_argument("--reference", default=None, help="render the shipped study table (126m, 356m, 1.3b)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed whose records feed the matrix")
    p.add_argument("--distances", default=None, help="similarity CSV (default: packaged table)")
    p.add_argument("--timestamp", default=None, help="stamp the index (omit for byte-stable output)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("enumerate", help="print every plan id for a first language and follow-ons")
    p.add_argument("--first", required=True)
    p.add_argument("--others", required=True, help="comma-separated follow-on languages")
    p.set_defaults(func=_cmd_enumerate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage; that's a validation error
        return 0 if exc.code == 0 else 1
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        _log(f"error: {exc}")
        return 1
    except (RuntimeError, OSError) as exc:
        _log(f"runtime failure: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
