"""Distribution-shift metrics between language corpora.

Three instruments: token distribution similarity (TDS), the cosine between
vocabulary-indexed token frequency vectors of weighted corpus samples; a
hashed character n-gram language identifier trained by deterministic
full-batch gradient descent; and the contamination matrix that classifier
produces when run over each corpus.
"""

from __future__ import annotations

import zlib

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.sparse as sp

from .bpe import Vocab, encode
from .corpus import Document, LanguageCorpus, pack_stream, sample_documents
from .errors import ConfigError, DataError, InputError, ParameterError, ParseError
from .numerics import RngState


@dataclass
class TokenFrequencyVector:
    """Occurrence counts per vocabulary id over one corpus sample."""

    counts: np.ndarray  # int64, length == vocabulary size
    total: int
    n_samples: int

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if (self.counts < 0).any():
            raise DataError("negative token count")
        if int(self.counts.sum()) != self.total:
            raise DataError(f"counts sum {int(self.counts.sum())} != total {self.total}")


def token_frequency_vector(
    corpus: LanguageCorpus,
    vocab: Vocab,
    n_samples: int,
    rng: RngState,
    unit: str = "documents",
    row_len: int | None = None,
) -> TokenFrequencyVector:
    """Count tokens over a weighted sample of the corpus.

    unit selects the sampling unit: "documents" draws whole documents from
    the corpus distribution; "sequences" draws packed rows of row_len ids
    (end-of-document markers included), matching how training consumes data.
    """
    if n_samples < 1:
        raise ParameterError(f"n_samples must be positive, got {n_samples}")
    counts = np.zeros(vocab.size, dtype=np.int64)
    if unit == "documents":
        sampler = sample_documents(corpus, rng)
        cache: dict[tuple[str, int], np.ndarray] = {}
        for _ in range(n_samples):
            name, j, doc = next(sampler)
            ids = cache.get((name, j))
            if ids is None:
                ids = np.asarray(encode(vocab, doc.text), dtype=np.int64)
                cache[(name, j)] = ids
            if ids.size:
                counts += np.bincount(ids, minlength=vocab.size)
    elif unit == "sequences":
        if row_len is None or row_len < 2:
            raise ParameterError("sequences unit needs row_len >= 2")
        rows = pack_stream(corpus, vocab, row_len, rng)
        for _ in range(n_samples):
            counts += np.bincount(next(rows), minlength=vocab.size)
    else:
        raise ParameterError(f"unknown sampling unit {unit!r}")
    total = int(counts.sum())
    if total == 0:
        raise InputError("sample contained no tokens")
    return TokenFrequencyVector(counts=counts, total=total, n_samples=n_samples)


def cosine_similarity(u, v) -> float:
    """Cosine of two nonnegative count vectors, in [0, 1]."""
    ua = np.asarray(u.counts if isinstance(u, TokenFrequencyVector) else u, dtype=np.float64)
    va = np.asarray(v.counts if isinstance(v, TokenFrequencyVector) else v, dtype=np.float64)
    if ua.shape != va.shape:
        raise ParameterError(f"vector shapes differ: {ua.shape} vs {va.shape}")
    nu = float(np.linalg.norm(ua))
    nv = float(np.linalg.norm(va))
    if nu == 0.0 or nv == 0.0:
        raise InputError("cosine of a zero vector is undefined")
    return min(1.0, float(ua @ va) / (nu * nv))


def tds(
    corpus_a: LanguageCorpus,
    corpus_b: LanguageCorpus,
    vocab: Vocab,
    n_samples: int,
    rng: RngState,
    unit: str = "documents",
    row_len: int | None = None,
) -> float:
    """Token distribution similarity between two corpora.

    Each corpus is sampled with a stream keyed on the base rng and the
    corpus's own content fingerprint, so the value is symmetric in its
    arguments, and a corpus compared against a byte-identical clone of
    itself yields two identical count vectors (cosine 1 up to rounding).
    """
    vec_a = token_frequency_vector(
        corpus_a, vocab, n_samples, rng.child(corpus_a.content_fingerprint()), unit, row_len
    )
    vec_b = token_frequency_vector(
        corpus_b, vocab, n_samples, rng.child(corpus_b.content_fingerprint()), unit, row_len
    )
    return cosine_similarity(vec_a, vec_b)


# ---------------------------------------------------------------------------
# Language identification


@dataclass(frozen=True)
class LangIdConfig:
    """Hashed character n-gram classifier settings.

    Documents are truncated to max_chars before featurization; n-gram counts
    are L1-normalized and hashed into hash_dim buckets. Training is plain
    full-batch gradient descent on the softmax objective, run for a fixed
    number of epochs, with no bias term: a document with no features scores
    uniformly across languages.
    """

    ngram_min: int = 1
    ngram_max: int = 5
    hash_dim: int = 1 << 18
    max_chars: int = 256
    epochs: int = 150
    # L1-normalized features spread over hundreds of buckets leave the
    # objective very flat (per-doc squared norm around 1e-3), so steps that
    # look huge for raw counts are still deep inside the stable range
    lr: float = 200.0
    holdout_fraction: float = 0.2

    def validate(self) -> None:
        if not (1 <= self.ngram_min <= self.ngram_max):
            raise ConfigError(f"bad n-gram range [{self.ngram_min}, {self.ngram_max}]")
        if self.hash_dim < 2 or self.max_chars < 1 or self.epochs < 1 or self.lr <= 0:
            raise ConfigError("hash_dim, max_chars, epochs, lr must be positive")
        if not (0.0 <= self.holdout_fraction < 1.0):
            raise ConfigError(f"holdout_fraction must be in [0, 1), got {self.holdout_fraction}")


def _features(text: str, config: LangIdConfig) -> dict[int, float]:
    text = text[: config.max_chars]
    raw: dict[int, float] = {}
    mask = config.hash_dim - 1 if (config.hash_dim & (config.hash_dim - 1)) == 0 else None
    for n in range(config.ngram_min, config.ngram_max + 1):
        for i in range(len(text) - n + 1):
            h = zlib.crc32(text[i : i + n].encode("utf-8"))
            idx = h & mask if mask is not None else h % config.hash_dim
            raw[idx] = raw.get(idx, 0.0) + 1.0
    total = sum(raw.values())
    if total:
        inv = 1.0 / total
        raw = {k: v * inv for k, v in raw.items()}
    return raw


def _feature_matrix(texts: list[str], config: LangIdConfig) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    for text in texts:
        feats = _features(text, config)
        for idx in sorted(feats):
            indices.append(idx)
            values.append(feats[idx])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(values), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(texts), config.hash_dim),
    )


@dataclass
class LangIdModel:
    """Multinomial softmax classifier over hashed n-gram features.

    Biases are kept at zero: a featureless document then scores uniformly
    across languages instead of inheriting the training class priors.
    """

    languages: list[str]
    weights: np.ndarray  # (n_languages, hash_dim) float64
    biases: np.ndarray  # (n_languages,) float64, all zero
    config: LangIdConfig
    train_accuracy: float = 0.0
    holdout_accuracy: float = 0.0

    def __post_init__(self) -> None:
        if self.weights.shape != (len(self.languages), self.config.hash_dim):
            raise DataError(f"weight shape {self.weights.shape} does not match model")
        if self.biases.shape != (len(self.languages),):
            raise DataError(f"bias shape {self.biases.shape} does not match model")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise DataError("non-finite classifier parameters")


def _doc_texts(data) -> list[str]:
    if isinstance(data, LanguageCorpus):
        return [d.text for d in data.documents()]
    return [d.text if isinstance(d, Document) else str(d) for d in data]


def train_langid(
    corpora: dict[str, object], config: LangIdConfig, rng: RngState
) -> LangIdModel:
    """Train the classifier on labeled corpora and report held-out accuracy.

    corpora maps language name to a LanguageCorpus or list of documents.
    A per-language slice is held out (fraction from the config) before
    training; everything is deterministic in the rng.
    """
    config.validate()
    if len(corpora) < 2:
        raise ConfigError(f"language identification needs >= 2 languages, got {len(corpora)}")
    languages = sorted(corpora)
    train_texts: list[str] = []
    train_labels: list[int] = []
    hold_texts: list[str] = []
    hold_labels: list[int] = []
    for li, lang in enumerate(languages):
        texts = _doc_texts(corpora[lang])
        if len(texts) < 100:
            raise InputError(f"{lang}: need at least 100 documents, got {len(texts)}")
        perm = rng.child(f"holdout:{lang}").generator().permutation(len(texts))
        n_hold = int(round(config.holdout_fraction * len(texts)))
        for j in perm[:n_hold]:
            hold_texts.append(texts[j])
            hold_labels.append(li)
        for j in perm[n_hold:]:
            train_texts.append(texts[j])
            train_labels.append(li)

    x = _feature_matrix(train_texts, config)
    y = np.asarray(train_labels)
    n, k = x.shape[0], len(languages)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    w = np.zeros((k, config.hash_dim))
    for _ in range(config.epochs):
        logits = x @ w.T
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        grad = (probs - onehot).T @ x / n
        w -= config.lr * np.asarray(grad)

    model = LangIdModel(languages=languages, weights=w, biases=np.zeros(k), config=config)
    model.train_accuracy = _accuracy(model, x, y)
    if hold_texts:
        xh = _feature_matrix(hold_texts, config)
        model.holdout_accuracy = _accuracy(model, xh, np.asarray(hold_labels))
    return model


def _accuracy(model: LangIdModel, x: sp.csr_matrix, y: np.ndarray) -> float:
    pred = np.asarray(x @ model.weights.T + model.biases).argmax(axis=1)
    return float((pred == y).mean())


def classify(model: LangIdModel, doc) -> tuple[str, float]:
    """(language, confidence) for one document.

    A document with no features (empty text) has zero score everywhere, so
    confidence is exactly 1 / n_languages and the first language wins the tie.
    """
    text = doc.text if isinstance(doc, Document) else str(doc)
    feats = _features(text, model.config)
    scores = model.biases.copy()
    for idx, val in feats.items():
        scores += val * model.weights[:, idx]
    scores -= scores.max()
    probs = np.exp(scores)
    probs /= probs.sum()
    best = int(np.argmax(probs))
    return model.languages[best], float(probs[best])


def save_langid(model: LangIdModel, path) -> None:
    np.savez_compressed(
        path,
        languages=np.asarray(model.languages),
        weights=model.weights,
        biases=model.biases,
        config=np.asarray(
            [
                model.config.ngram_min,
                model.config.ngram_max,
                model.config.hash_dim,
                model.config.max_chars,
                model.config.epochs,
            ],
            dtype=np.int64,
        ),
        config_float=np.asarray([model.config.lr, model.config.holdout_fraction]),
        accuracy=np.asarray([model.train_accuracy, model.holdout_accuracy]),
    )


def load_langid(path) -> LangIdModel:
    try:
        with np.load(path, allow_pickle=False) as blob:
            ci = blob["config"]
            cf = blob["config_float"]
            config = LangIdConfig(
                ngram_min=int(ci[0]),
                ngram_max=int(ci[1]),
                hash_dim=int(ci[2]),
                max_chars=int(ci[3]),
                epochs=int(ci[4]),
                lr=float(cf[0]),
                holdout_fraction=float(cf[1]),
            )
            acc = blob["accuracy"]
            return LangIdModel(
                languages=[str(s) for s in blob["languages"]],
                weights=blob["weights"],
                biases=blob["biases"],
                config=config,
                train_accuracy=float(acc[0]),
                holdout_accuracy=float(acc[1]),
            )
    except (KeyError, ValueError, OSError) as exc:
        raise ParseError(f"{path}: not a classifier file: {exc}") from exc


@dataclass
class ContaminationMatrix:
    """Per-corpus percentages of documents classified as each language.

    rows follow row_languages (the corpus labels), columns follow
    col_languages (the classifier's labels); every row sums to 100.
    """

    row_languages: list[str]
    col_languages: list[str]
    percent: np.ndarray  # (rows, cols) float64
    counts: np.ndarray  # (rows, cols) int64

    def get(self, corpus_lang: str, classified_lang: str) -> float:
        try:
            r = self.row_languages.index(corpus_lang)
            c = self.col_languages.index(classified_lang)
        except ValueError as exc:
            raise KeyError(f"no cell ({corpus_lang}, {classified_lang})") from exc
        return float(self.percent[r, c])

    def to_csv(self) -> str:
        lines = ["corpus," + ",".join(self.col_languages)]
        for r, lang in enumerate(self.row_languages):
            cells = [_format_percent(v) for v in self.percent[r]]
            lines.append(lang + "," + ",".join(cells))
        return "\n".join(lines) + "\n"


def _format_percent(v: float) -> str:
    # two decimals, except tiny nonzero shares keep four to stay visible
    if 0.0 < v < 0.01:
        return f"{v:.4f}"
    return f"{v:.2f}"


def contamination_matrix(corpora: dict[str, object], model: LangIdModel) -> ContaminationMatrix:
    """Classify every document of every corpus and tabulate percentages."""
    if not corpora:
        raise InputError("no corpora to classify")
    rows = sorted(corpora)
    unknown = [lang for lang in rows if lang not in model.languages]
    if unknown:
        raise InputError(f"classifier does not cover {unknown}; it knows {model.languages}")
    cols = list(model.languages)
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for r, lang in enumerate(rows):
        texts = _doc_texts(corpora[lang])
        if not texts:
            raise InputError(f"{lang}: empty corpus")
        x = _feature_matrix(texts, model.config)
        pred = np.asarray(x @ model.weights.T).argmax(axis=1)
        for c in range(len(cols)):
            counts[r, c] = int((pred == c).sum())
    percent = 100.0 * counts / counts.sum(axis=1, keepdims=True)
    return ContaminationMatrix(rows, cols, percent, counts)


# ---------------------------------------------------------------------------
# Reference similarity tables


@dataclass
class SimilarityTable:
    """Symmetric language-pair similarity values in [0, 1] for one metric."""

    metric: str
    values: dict[tuple[str, str], float] = field(default_factory=dict)

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def set(self, a: str, b: str, value: float) -> None:
        if not (0.0 <= value <= 1.0):
            raise DataError(f"{self.metric}({a},{b}) = {value} outside [0, 1]")
        key = self._key(a, b)
        old = self.values.get(key)
        if old is not None and old != value:
            raise DataError(f"{self.metric}({a},{b}) given twice: {old} and {value}")
        self.values[key] = value

    def get(self, a: str, b: str) -> float:
        if a == b:
            if a not in self.languages():
                raise KeyError(f"{self.metric} has no language {a!r}")
            return 1.0
        key = self._key(a, b)
        if key not in self.values:
            raise KeyError(f"{self.metric} has no value for pair ({a}, {b})")
        return self.values[key]

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self.values)

    def languages(self) -> list[str]:
        langs = set()
        for a, b in self.values:
            langs.add(a)
            langs.add(b)
        return sorted(langs)


def _reference_path(name: str):
    return resources.files("langshift.data").joinpath(name)


def load_feature_distances(path=None, metric: str | None = None):
    """Similarity tables from a metric,lang_a,lang_b,value CSV.

    With no path, the packaged reference table ships values for the en, da,
    is, no pairs under the TDS, SYN, INV, and PHON metrics. Returns a dict
    of metric name to SimilarityTable, or a single table when metric names one.
    """
    if path is None:
        text = _reference_path("feature_distances.csv").read_text(encoding="utf-8")
        origin = "feature_distances.csv"
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
        origin = str(path)
    tables: dict[str, SimilarityTable] = {}
    lines = text.splitlines()
    if not lines or lines[0].strip() != "metric,lang_a,lang_b,value":
        raise ParseError(f"{origin}:1: expected header 'metric,lang_a,lang_b,value'")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ParseError(f"{origin}:{lineno}: expected 4 fields, got {len(parts)}")
        name, a, b, raw = parts
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"{origin}:{lineno}: bad value {raw!r}") from None
        table = tables.setdefault(name, SimilarityTable(metric=name))
        try:
            table.set(a, b, value)
        except DataError as exc:
            raise DataError(f"{origin}:{lineno}: {exc}") from exc
    if metric is not None:
        if metric not in tables:
            raise KeyError(f"{origin} has no metric {metric!r}; found {sorted(tables)}")
        return tables[metric]
    return tables


def load_contamination_reference(path=None) -> ContaminationMatrix:
    """The shipped reference contamination table (percent per corpus row)."""
    if path is None:
        text = _reference_path("contamination_reference.csv").read_text(encoding="utf-8")
        origin = "contamination_reference.csv"
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
        origin = str(path)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header[0] != "corpus" or len(header) < 2:
        raise ParseError(f"{origin}:1: expected 'corpus,<lang>,...' header")
    cols = header[1:]
    rows = []
    percent = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"{origin}:{lineno}: expected {len(header)} fields")
        rows.append(parts[0])
        try:
            percent.append([float(x) for x in parts[1:]])
        except ValueError as exc:
            raise ParseError(f"{origin}:{lineno}: bad percentage: {exc}") from None
    pct = np.asarray(percent)
    counts = np.zeros_like(pct, dtype=np.int64)  # reference table has no raw counts
    return ContaminationMatrix(rows, cols, pct, counts)
