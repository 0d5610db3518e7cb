"""Corpora: JSONL ingestion, weighted sampling, packing, splits, synthesis.

A language's corpus is a set of named datasets with a sampling weight each;
the training distribution over datasets is weight * size, normalized. The
synthetic generator produces Zipf-distributed bigram-chain languages with
controllable lexical overlap against a parent language and controllable
document-level contamination from another language, plus the ground-truth
labels that contamination measurement is scored against.
"""

from __future__ import annotations

import hashlib
import json
import os

from dataclasses import dataclass, field

import numpy as np

from .bpe import Vocab, encode
from .errors import ConfigError, InputError, ParameterError, ParseError
from .numerics import RngState


@dataclass(frozen=True)
class Document:
    """One document; lang/source are provenance labels, never model input."""

    text: str
    lang: str = ""
    source: str = ""


@dataclass(frozen=True)
class DatasetSpec:
    """One weighted dataset of a corpus spec; size is bytes or a byte estimate."""

    name: str
    path: str
    weight: float
    size: float
    category: str = ""


@dataclass(frozen=True)
class CorpusSpec:
    """Declares where a language's datasets live and how to weight them."""

    language: str
    datasets: tuple[DatasetSpec, ...]

    def validate(self) -> None:
        if not self.language:
            raise ConfigError("corpus spec needs a language name")
        if not self.datasets:
            raise ConfigError(f"{self.language}: corpus spec needs at least one dataset")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError(f"{self.language}: duplicate dataset names {names}")
        for d in self.datasets:
            if d.weight < 0 or d.size < 0:
                raise ConfigError(f"{self.language}/{d.name}: weight and size must be nonnegative")
        if not any(d.weight * d.size > 0 for d in self.datasets):
            raise ConfigError(f"{self.language}: no dataset has positive weight * size")


def normalize_weights(entries) -> np.ndarray:
    """Sampling probabilities proportional to weight * size.

    entries is a sequence of (weight, size) pairs; the result sums to 1.
    """
    rows = [(float(w), float(s)) for w, s in entries]
    if not rows:
        raise InputError("no datasets to weight")
    arr = np.asarray(rows, dtype=np.float64)
    if (arr < 0).any():
        raise InputError("weights and sizes must be nonnegative")
    mass = arr[:, 0] * arr[:, 1]
    total = mass.sum()
    if total <= 0:
        raise InputError("total weighted mass is zero")
    return mass / total


@dataclass
class LanguageCorpus:
    """Documents of one language, grouped into weighted datasets.

    weights maps dataset name to its sampling probability (summing to 1 over
    datasets); every positive-weight dataset must be nonempty before sampling.
    """

    language: str
    datasets: dict[str, list[Document]]
    weights: dict[str, float]
    _fingerprint: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if set(self.datasets) != set(self.weights):
            raise ConfigError(
                f"{self.language}: dataset names {sorted(self.datasets)} do not match "
                f"weight names {sorted(self.weights)}"
            )
        if self.weights:
            total = sum(self.weights.values())
            empty = all(not docs for docs in self.datasets.values())
            if any(w < 0 for w in self.weights.values()):
                raise ConfigError(f"{self.language}: negative weight in {self.weights}")
            # an empty corpus (e.g. a zero-sized split) may carry zero weights
            if abs(total - 1.0) > 1e-9 and not (empty and total == 0.0):
                raise ConfigError(f"{self.language}: weights must be a distribution, got {self.weights}")

    def n_docs(self) -> int:
        return sum(len(docs) for docs in self.datasets.values())

    def documents(self) -> list[Document]:
        """All documents, in dataset insertion order then document order."""
        out: list[Document] = []
        for docs in self.datasets.values():
            out.extend(docs)
        return out

    def content_fingerprint(self) -> str:
        """Hash of dataset structure, weights, and document texts.

        The language label is deliberately excluded so byte-identical corpora
        under different names fingerprint the same; similarity sampling keys
        its per-corpus streams on this value.
        """
        if self._fingerprint is None:
            h = hashlib.sha256()
            for name in self.datasets:
                docs = self.datasets[name]
                h.update(f"{name}\x00{self.weights[name]!r}\x00{len(docs)}\x1e".encode())
                for doc in docs:
                    raw = doc.text.encode("utf-8")
                    h.update(len(raw).to_bytes(8, "little"))
                    h.update(raw)
            self._fingerprint = h.hexdigest()
        return self._fingerprint


def single_dataset_corpus(language: str, docs: list[Document], name: str = "main") -> LanguageCorpus:
    return LanguageCorpus(language, {name: list(docs)}, {name: 1.0})


def read_jsonl_documents(path, default_lang: str = "", default_source: str = "") -> list[Document]:
    """Documents from a JSONL file of {"text": ..., "lang"?: ..., "source"?: ...}."""
    docs: list[Document] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(row, dict) or not isinstance(row.get("text"), str):
                raise ParseError(f"{path}:{lineno}: expected an object with a 'text' string")
            docs.append(
                Document(
                    text=row["text"],
                    lang=row.get("lang", default_lang),
                    source=row.get("source", default_source),
                )
            )
    return docs


def save_corpus_jsonl(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps({"text": doc.text, "lang": doc.lang, "source": doc.source}))
            f.write("\n")


def load_corpus(spec: CorpusSpec, base_dir=None) -> LanguageCorpus:
    """Materialize a corpus spec from disk; weights follow weight * size."""
    spec.validate()
    datasets: dict[str, list[Document]] = {}
    for ds in spec.datasets:
        path = ds.path
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        datasets[ds.name] = read_jsonl_documents(path, spec.language, ds.name)
    probs = normalize_weights([(d.weight, d.size) for d in spec.datasets])
    weights = {d.name: float(p) for d, p in zip(spec.datasets, probs)}
    for name, docs in datasets.items():
        if weights[name] > 0 and not docs:
            raise InputError(f"{spec.language}/{name}: positive weight but no documents")
    return LanguageCorpus(spec.language, datasets, weights)


def _largest_remainder(counts: np.ndarray, target: int) -> np.ndarray:
    """Integer allocation of target proportional to counts."""
    total = counts.sum()
    quota = target * counts / total
    alloc = np.floor(quota).astype(int)
    short = target - alloc.sum()
    if short > 0:
        # ties go to the earlier dataset
        order = np.argsort(-(quota - alloc), kind="stable")
        alloc[order[:short]] += 1
    return alloc


def make_splits(
    corpus: LanguageCorpus, rng: RngState, sizes: dict[str, int]
) -> tuple[LanguageCorpus, LanguageCorpus, LanguageCorpus]:
    """Disjoint (train, val, test) splits; val/test counts come from sizes.

    Allocation is per-dataset proportional (largest remainder), so the
    weighting semantics carry over; train keeps everything not selected.
    """
    if set(sizes) != {"val", "test"}:
        raise InputError(f"sizes must have exactly the keys val/test, got {sorted(sizes)}")
    val_total, test_total = int(sizes["val"]), int(sizes["test"])
    if val_total < 0 or test_total < 0:
        raise InputError("split sizes must be nonnegative")
    names = list(corpus.datasets)
    counts = np.asarray([len(corpus.datasets[n]) for n in names])
    n = int(counts.sum())
    if val_total + test_total > n:
        raise InputError(f"requested {val_total + test_total} held-out docs from {n} available")
    val_alloc = _largest_remainder(counts, val_total) if val_total else np.zeros(len(names), int)
    test_alloc = _largest_remainder(counts, test_total) if test_total else np.zeros(len(names), int)

    train_sets: dict[str, list[Document]] = {}
    val_sets: dict[str, list[Document]] = {}
    test_sets: dict[str, list[Document]] = {}
    for i, name in enumerate(names):
        docs = corpus.datasets[name]
        nv, nt = int(val_alloc[i]), int(test_alloc[i])
        if nv + nt > len(docs):
            raise InputError(
                f"{corpus.language}/{name}: needs {nv + nt} held-out docs, has {len(docs)}"
            )
        perm = rng.child(f"split:{name}").generator().permutation(len(docs))
        val_sets[name] = [docs[j] for j in perm[:nv]]
        test_sets[name] = [docs[j] for j in perm[nv : nv + nt]]
        train_sets[name] = [docs[j] for j in perm[nv + nt :]]

    def build(sets: dict[str, list[Document]]) -> LanguageCorpus:
        mass = {name: corpus.weights[name] for name in names if sets[name]}
        total = sum(mass.values())
        if total > 0:
            weights = {name: (mass.get(name, 0.0) / total if sets[name] else 0.0) for name in names}
        else:
            weights = {name: 0.0 for name in names}
        return LanguageCorpus(corpus.language, sets, weights)

    return build(train_sets), build(val_sets), build(test_sets)


def sample_documents(corpus: LanguageCorpus, rng: RngState):
    """Infinite weighted document sampler.

    Yields (dataset_name, doc_index, Document): dataset chosen by the corpus
    weights, document uniformly within the dataset, with replacement. Fully
    determined by the RngState.
    """
    names = [n for n in corpus.datasets if corpus.weights[n] > 0]
    if not names:
        raise InputError(f"{corpus.language}: no sampleable dataset")
    for name in names:
        if not corpus.datasets[name]:
            raise InputError(f"{corpus.language}/{name}: positive weight but no documents")
    probs = np.asarray([corpus.weights[n] for n in names])
    cum = np.cumsum(probs / probs.sum())
    doclists = [corpus.datasets[n] for n in names]
    gen = rng.generator()
    top = len(names) - 1
    while True:
        d = min(int(np.searchsorted(cum, gen.random(), side="right")), top)
        j = int(gen.integers(0, len(doclists[d])))
        yield names[d], j, doclists[d][j]


def pack_stream(corpus: LanguageCorpus, vocab: Vocab, seq_len: int, rng: RngState):
    """Infinite stream of packed token rows of exactly seq_len ids.

    Documents are sampled by weight, encoded once each (memoized), terminated
    with the end-of-document id, and concatenated; rows are consecutive
    seq_len slices of that stream, so no padding is ever emitted.
    """
    if seq_len < 2:
        raise ParameterError(f"seq_len must be at least 2, got {seq_len}")
    sampler = sample_documents(corpus, rng)
    cache: dict[tuple[str, int], np.ndarray] = {}
    chunks: list[np.ndarray] = []
    have = 0
    while True:
        while have < seq_len:
            name, j, doc = next(sampler)
            ids = cache.get((name, j))
            if ids is None:
                ids = np.asarray(encode(vocab, doc.text) + [vocab.eod_id], dtype=np.int32)
                cache[(name, j)] = ids
            chunks.append(ids)
            have += ids.size
        stream = np.concatenate(chunks)
        full = stream.size // seq_len
        for i in range(full):
            yield stream[i * seq_len : (i + 1) * seq_len].copy()
        tail = stream[full * seq_len :]
        chunks = [tail] if tail.size else []
        have = tail.size


def batch_stream(corpus: LanguageCorpus, vocab: Vocab, seq_len: int, batch_size: int, rng: RngState):
    """Infinite stream of (batch_size, seq_len) packed batches."""
    if batch_size < 1:
        raise ParameterError(f"batch_size must be positive, got {batch_size}")
    rows = pack_stream(corpus, vocab, seq_len, rng)
    while True:
        yield np.stack([next(rows) for _ in range(batch_size)])


def pack_eval(docs, vocab: Vocab, seq_len: int) -> list[np.ndarray]:
    """Deterministic sequential packing for evaluation sets.

    Documents are concatenated in order with end-of-document ids; the final
    partial row is dropped so every row is exactly seq_len ids.
    """
    if isinstance(docs, LanguageCorpus):
        docs = docs.documents()
    if seq_len < 2:
        raise ParameterError(f"seq_len must be at least 2, got {seq_len}")
    pieces = []
    for doc in docs:
        pieces.append(np.asarray(encode(vocab, doc.text) + [vocab.eod_id], dtype=np.int32))
    if not pieces:
        raise InputError("cannot pack an empty document list")
    stream = np.concatenate(pieces)
    full = stream.size // seq_len
    if full == 0:
        raise InputError(f"{stream.size} tokens cannot fill one row of {seq_len}")
    return [stream[i * seq_len : (i + 1) * seq_len].copy() for i in range(full)]


def clip_token_budget(corpus: LanguageCorpus, vocab: Vocab, budget: int) -> LanguageCorpus:
    """Trim a corpus to roughly a fixed token count.

    Walks documents in corpus order, keeping them until the running total of
    encoded tokens (end-of-document ids included) reaches the budget. Used to
    hold the training-set size constant across languages.
    """
    if budget < 1:
        raise ParameterError(f"token budget must be positive, got {budget}")
    kept: dict[str, list[Document]] = {name: [] for name in corpus.datasets}
    total = 0
    for name, docs in corpus.datasets.items():
        for doc in docs:
            if total >= budget:
                break
            total += len(encode(vocab, doc.text)) + 1
            kept[name].append(doc)
        if total >= budget:
            break
    mass = {name: corpus.weights[name] for name in corpus.datasets if kept[name]}
    scale = sum(mass.values())
    if scale <= 0:
        raise InputError("token budget smaller than the first document")
    weights = {name: mass.get(name, 0.0) / scale for name in corpus.datasets}
    return LanguageCorpus(corpus.language, kept, weights)


# ---------------------------------------------------------------------------
# Synthetic languages


@dataclass(frozen=True)
class SyntheticLanguageSpec:
    """Recipe for a synthetic language.

    Word forms are random strings over the alphabet; unigram frequencies are
    Zipf with the given exponent; documents are bigram chains over a fixed
    per-word successor table. lexical_overlap copies that fraction of the
    parent's lexicon rank-for-rank, strided evenly across the frequency
    spectrum so shared token mass grows steadily with the fraction, and
    contamination_rate replaces exactly round(rate * n_docs) documents,
    chosen uniformly, with freshly sampled contaminant-language documents.
    """

    name: str
    n_words: int = 2000
    zipf_exponent: float = 1.1
    alphabet: str = "abcdefgh"
    word_len_min: int = 3
    word_len_max: int = 10
    lexical_overlap: float = 0.0
    parent: str | None = None
    contamination_rate: float = 0.0
    contaminant: str | None = None
    bigram_temperature: float = 1.0
    successor_fanout: int = 24
    n_docs: int = 1000
    doc_len_mean: float = 60.0
    doc_len_min: int = 8

    def validate(self) -> None:
        if not self.name:
            raise ConfigError("synthetic language needs a name")
        if self.n_words < 10:
            raise ConfigError(f"{self.name}: n_words must be at least 10")
        if self.zipf_exponent <= 0:
            raise ConfigError(f"{self.name}: zipf_exponent must be positive")
        if len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise ConfigError(f"{self.name}: alphabet must be nonempty unique characters")
        if not (1 <= self.word_len_min <= self.word_len_max):
            raise ConfigError(f"{self.name}: bad word length range")
        if not (0.0 <= self.lexical_overlap <= 1.0):
            raise ConfigError(f"{self.name}: lexical_overlap must be in [0, 1]")
        if self.lexical_overlap > 0 and not self.parent:
            raise ConfigError(f"{self.name}: lexical_overlap needs a parent language")
        if not (0.0 <= self.contamination_rate < 1.0):
            raise ConfigError(f"{self.name}: contamination_rate must be in [0, 1)")
        if self.contamination_rate > 0 and not self.contaminant:
            raise ConfigError(f"{self.name}: contamination_rate needs a contaminant language")
        if self.bigram_temperature <= 0:
            raise ConfigError(f"{self.name}: bigram_temperature must be positive")
        if self.successor_fanout < 1:
            raise ConfigError(f"{self.name}: successor_fanout must be positive")
        if self.n_docs < 1:
            raise ConfigError(f"{self.name}: n_docs must be positive")
        if self.doc_len_min < 2 or self.doc_len_mean < self.doc_len_min:
            raise ConfigError(f"{self.name}: doc length distribution is degenerate")
        space = sum(len(self.alphabet) ** k for k in range(self.word_len_min, self.word_len_max + 1))
        if space < 2 * self.n_words:
            raise ConfigError(
                f"{self.name}: alphabet/word-length space of {space} forms is too small "
                f"for {self.n_words} distinct words"
            )


DISJOINT_ALPHABETS = ("abcdef", "ghijkl", "mnopqr", "stuvwx")


class SyntheticLanguage:
    """A generated language: its lexicon, its corpus, and per-document truth.

    true_labels[i] names the language document i was actually sampled from;
    it differs from the corpus language exactly for planted contaminants.
    """

    def __init__(self, spec, lexicon, corpus, true_labels, succ, slot_cum, word_cum):
        self.spec = spec
        self.lexicon = lexicon
        self.corpus = corpus
        self.true_labels = true_labels
        self._succ = succ
        self._slot_cum = slot_cum
        self._word_cum = word_cum

    def sample_text(self, gen: np.random.Generator, n_words: int | None = None) -> str:
        """One document's text drawn from this language's chain model."""
        spec = self.spec
        if n_words is None:
            n_words = spec.doc_len_min + int(gen.poisson(spec.doc_len_mean - spec.doc_len_min))
        top = len(self.lexicon) - 1
        cur = min(int(np.searchsorted(self._word_cum, gen.random(), side="right")), top)
        words = [self.lexicon[cur]]
        if n_words > 1:
            slots = np.searchsorted(self._slot_cum, gen.random(n_words - 1), side="right")
            slots = np.minimum(slots, self._slot_cum.size - 1)
            for s in slots:
                cur = int(self._succ[cur, s])
                words.append(self.lexicon[cur])
        return " ".join(words)


def _zipf_cumulative(n_words: int, exponent: float) -> np.ndarray:
    p = np.arange(1, n_words + 1, dtype=np.float64) ** (-exponent)
    p /= p.sum()
    return np.cumsum(p)


def gen_synthetic_language(
    spec: SyntheticLanguageSpec,
    rng: RngState,
    others: dict[str, SyntheticLanguage] | None = None,
) -> SyntheticLanguage:
    """Generate a language deterministically from spec and rng.

    Independent child streams handle the lexicon, the bigram tables, the
    documents, and the contamination pass, so a full-overlap clone generated
    from the same RngState reproduces its parent's documents byte for byte.
    Parent and contaminant languages are looked up in ``others`` by name.
    """
    spec.validate()
    others = others or {}
    parent = None
    if spec.parent is not None:
        parent = others.get(spec.parent)
        if parent is None and (spec.lexical_overlap > 0):
            raise ConfigError(f"{spec.name}: parent language {spec.parent!r} not provided")

    # Lexicon: copy an evenly strided subset of parent ranks, anchored at
    # rank 0 (integer arithmetic, so exactly round(overlap * n_words) ranks
    # and the full lexicon at overlap 1), then mint fresh forms for the
    # rest. Anchoring at the top rank matters: Zipf mass is so top-heavy
    # that overlap excluding the head would barely register downstream.
    n_copy = int(round(spec.lexical_overlap * spec.n_words))
    copied = [(j * spec.n_words) // n_copy for j in range(n_copy)]
    if copied and len(parent.lexicon) < spec.n_words:
        raise ConfigError(
            f"{spec.name}: overlap needs {spec.n_words} parent ranks, "
            f"parent has {len(parent.lexicon)}"
        )
    lexicon: list[str | None] = [None] * spec.n_words
    for k in copied:
        lexicon[k] = parent.lexicon[k]
    seen = {lexicon[k] for k in copied}
    lgen = rng.child("lexicon").generator()
    max_tries = 200 * spec.n_words
    tries = 0
    for k in range(spec.n_words):
        if lexicon[k] is not None:
            continue
        while True:
            if tries > max_tries:
                raise ConfigError(f"{spec.name}: could not mint {spec.n_words} distinct words")
            tries += 1
            wlen = int(lgen.integers(spec.word_len_min, spec.word_len_max + 1))
            idx = lgen.integers(0, len(spec.alphabet), size=wlen)
            word = "".join(spec.alphabet[i] for i in idx)
            if word not in seen:
                break
        seen.add(word)
        lexicon[k] = word

    # Bigram tables: per-word successor candidates drawn from the unigram
    # Zipf law (so the chain's marginal stays Zipf), slot weights sharpened
    # or flattened by the temperature. Each table row is keyed on the word
    # form itself, not the language seed, so languages that share a word
    # also share its transition pattern; token frequencies then diverge
    # only as far as the lexicons do.
    word_cum = _zipf_cumulative(spec.n_words, spec.zipf_exponent)
    succ = np.empty((spec.n_words, spec.successor_fanout), dtype=np.int32)
    for k, word in enumerate(lexicon):
        wgen = RngState(seed=0).child(f"succ:{word}").generator()
        draws = wgen.random(spec.successor_fanout)
        succ[k] = np.minimum(
            np.searchsorted(word_cum, draws, side="right"), spec.n_words - 1
        )
    slot_w = np.arange(1, spec.successor_fanout + 1, dtype=np.float64) ** (
        -1.0 / spec.bigram_temperature
    )
    slot_cum = np.cumsum(slot_w / slot_w.sum())

    lang = SyntheticLanguage(spec, lexicon, None, None, succ, slot_cum, word_cum)

    dgen = rng.child("docs").generator()
    docs = [
        Document(lang.sample_text(dgen), lang=spec.name, source="synthetic")
        for _ in range(spec.n_docs)
    ]
    labels = [spec.name] * spec.n_docs

    if spec.contamination_rate > 0:
        contaminant = others.get(spec.contaminant)
        if contaminant is None:
            raise ConfigError(f"{spec.name}: contaminant language {spec.contaminant!r} not provided")
        # exact-count planting: round(rate * n_docs) documents, positions
        # uniform without replacement, so the realized rate never wobbles
        cgen = rng.child("contamination").generator()
        n_plant = int(round(spec.contamination_rate * spec.n_docs))
        for i in np.sort(cgen.choice(spec.n_docs, size=n_plant, replace=False)):
            docs[int(i)] = Document(
                contaminant.sample_text(cgen), lang=spec.name, source="synthetic"
            )
            labels[int(i)] = contaminant.spec.name

    lang.corpus = single_dataset_corpus(spec.name, docs, name="synthetic")
    lang.true_labels = labels
    return lang


def save_ground_truth(labels: list[str], path) -> None:
    """Sidecar JSONL of {"index", "true_lang"} rows aligned with the corpus."""
    with open(path, "w", encoding="utf-8") as f:
        for i, lab in enumerate(labels):
            f.write(json.dumps({"index": i, "true_lang": lab}))
            f.write("\n")


def load_ground_truth(path) -> list[str]:
    rows: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                rows[int(row["index"])] = str(row["true_lang"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad ground-truth row: {exc}") from exc
    if sorted(rows) != list(range(len(rows))):
        raise ParseError(f"{path}: ground-truth indices are not 0..{len(rows) - 1}")
    return [rows[i] for i in range(len(rows))]
