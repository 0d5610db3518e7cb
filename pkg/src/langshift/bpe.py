"""Byte-level BPE tokenizer: trainer, encoder, decoder, and a text vocab format.

No pre-tokenization: merges are learned over raw UTF-8 bytes, so any unicode
text round-trips exactly. Ids 0..255 are the bytes, 256 is the end-of-document
marker, 257 is a reserved unknown marker (never produced by encode), and
merged tokens start at 258 in the order they were learned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import hashlib

import numpy as np

from .errors import DataError, InputError, ParseError

BYTE_TOKENS = 256
EOD_ID = 256
UNK_ID = 257
FIRST_MERGE_ID = 258
EOD_TEXT = b"<|eod|>"
UNK_TEXT = b"<|unk|>"

_FORMAT_TAG = "langshift-bpe v1"


@dataclass
class Vocab:
    """Token table plus the ordered merge list that produced it.

    tokens[i] is the byte string written when id i is decoded; merge k
    produced id FIRST_MERGE_ID + k by concatenating its pair's bytes.
    """

    tokens: list[bytes]
    merges: list[tuple[int, int]]
    eod_id: int = EOD_ID
    unk_id: int = UNK_ID
    _ranks: dict[tuple[int, int], int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.tokens) != FIRST_MERGE_ID + len(self.merges):
            raise DataError(
                f"{len(self.tokens)} tokens inconsistent with {len(self.merges)} merges"
            )
        for i in range(BYTE_TOKENS):
            if self.tokens[i] != bytes([i]):
                raise DataError(f"token {i} must be the raw byte {i:#04x}")
        if self.tokens[EOD_ID] != EOD_TEXT or self.tokens[UNK_ID] != UNK_TEXT:
            raise DataError("special token markers are fixed")
        self._ranks = {}
        for k, (left, right) in enumerate(self.merges):
            new_id = FIRST_MERGE_ID + k
            if not (0 <= left < new_id) or not (0 <= right < new_id):
                raise DataError(f"merge {k} references a later id: ({left}, {right})")
            if left == EOD_ID or left == UNK_ID or right == EOD_ID or right == UNK_ID:
                raise DataError(f"merge {k} touches a special id")
            if self.tokens[new_id] != self.tokens[left] + self.tokens[right]:
                raise DataError(f"token {new_id} does not equal its merge pair's bytes")
            self._ranks[(left, right)] = new_id

    @property
    def size(self) -> int:
        return len(self.tokens)


def _base_tokens() -> list[bytes]:
    toks = [bytes([i]) for i in range(BYTE_TOKENS)]
    toks.append(EOD_TEXT)
    toks.append(UNK_TEXT)
    return toks


def train_bpe(texts, vocab_size: int) -> Vocab:
    """Learn merges over a corpus of text streams.

    Pair frequencies are counted over adjacent id pairs (overlapping pairs
    included) and never across document boundaries. Equal-frequency ties go
    to the lexicographically smallest (left bytes, right bytes) pair, so
    training is order-independent and fully deterministic. If the corpus
    collapses before vocab_size is reached, training stops early with a
    smaller vocabulary.
    """
    if vocab_size < FIRST_MERGE_ID:
        raise InputError(
            f"vocab_size must be at least {FIRST_MERGE_ID} "
            f"({BYTE_TOKENS} bytes + 2 specials), got {vocab_size}"
        )
    chunks: list[np.ndarray] = []
    boundary = np.asarray([-1], dtype=np.int64)
    total = 0
    for text in texts:
        raw = text.encode("utf-8")
        total += len(raw)
        if raw:
            chunks.append(np.frombuffer(raw, dtype=np.uint8).astype(np.int64))
            chunks.append(boundary)
    if total == 0:
        raise InputError("cannot train a tokenizer on an empty corpus")

    tokens = _base_tokens()
    merges: list[tuple[int, int]] = []
    seq = np.concatenate(chunks)

    while len(tokens) < vocab_size:
        left_ids = seq[:-1]
        right_ids = seq[1:]
        valid = (left_ids >= 0) & (right_ids >= 0)
        if not valid.any():
            break
        codes = (left_ids[valid] << 32) | right_ids[valid]
        uniq, counts = np.unique(codes, return_counts=True)
        top = counts.max()
        candidates = uniq[counts == top]
        left, right = min(
            ((int(c) >> 32, int(c) & 0xFFFFFFFF) for c in candidates),
            key=lambda lr: (tokens[lr[0]], tokens[lr[1]]),
        )

        new_id = len(tokens)
        tokens.append(tokens[left] + tokens[right])
        merges.append((left, right))

        matches = np.where((left_ids == left) & (right_ids == right))[0]
        # Greedy leftmost application: drop matches that overlap a kept one
        # (only possible when left == right, e.g. "aaa").
        kept: list[int] = []
        last = -2
        for pos in matches.tolist():
            if pos > last + 1:
                kept.append(pos)
                last = pos
        kept_arr = np.asarray(kept, dtype=np.int64)
        seq[kept_arr] = new_id
        seq = np.delete(seq, kept_arr + 1)

    return Vocab(tokens=tokens, merges=merges)


def encode(vocab: Vocab, text: str) -> list[int]:
    """Token ids for a text: UTF-8 bytes, then merges by ascending rank.

    Applying the lowest-ranked applicable merge first reproduces the id
    sequence the trainer would have produced, because every merge learned
    later can only combine tokens that exist after the earlier ones applied.
    Special ids are never emitted.
    """
    ids = list(text.encode("utf-8"))
    ranks = vocab._ranks
    if not ranks:
        return ids
    while len(ids) >= 2:
        best_rank = None
        best_pair = None
        prev = ids[0]
        for cur in ids[1:]:
            rank = ranks.get((prev, cur))
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank = rank
                best_pair = (prev, cur)
            prev = cur
        if best_pair is None:
            break
        left, right = best_pair
        out: list[int] = []
        i = 0
        n = len(ids)
        while i < n:
            if i + 1 < n and ids[i] == left and ids[i + 1] == right:
                out.append(best_rank)
                i += 2
            else:
                out.append(ids[i])
                i += 1
        ids = out
    return ids


def decode(vocab: Vocab, ids) -> str:
    """Text for a token id sequence.

    Full-token sequences produced by encode() round-trip exactly; slicing a
    sequence mid-codepoint yields unicode replacement characters for the
    stranded bytes. Special ids decode to their marker strings.
    """
    n = vocab.size
    parts = []
    for i in ids:
        i = int(i)
        if i < 0 or i >= n:
            raise IndexError(f"token id {i} out of range for vocabulary of {n}")
        parts.append(vocab.tokens[i])
    return b"".join(parts).decode("utf-8", errors="replace")


def save_vocab(vocab: Vocab, path) -> None:
    """Write the text vocabulary format (one hex token per line, then merges)."""
    with open(path, "w", encoding="ascii") as f:
        f.write(serialize_vocab(vocab))


def serialize_vocab(vocab: Vocab) -> str:
    lines = [
        f"{_FORMAT_TAG} tokens={vocab.size} merges={len(vocab.merges)} "
        f"eod={vocab.eod_id} unk={vocab.unk_id}"
    ]
    lines.extend(tok.hex() for tok in vocab.tokens)
    lines.append("merges")
    lines.extend(f"{left} {right}" for left, right in vocab.merges)
    return "\n".join(lines) + "\n"


def load_vocab(path) -> Vocab:
    """Read the text vocabulary format; errors carry path and line number."""
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()

    def fail(lineno: int, why: str):
        raise ParseError(f"{path}:{lineno}: {why}")

    if not lines:
        fail(1, "empty vocabulary file")
    header = lines[0].split()
    if len(header) != 6 or " ".join(header[:2]) != _FORMAT_TAG:
        fail(1, f"bad header; expected '{_FORMAT_TAG} tokens=N merges=M eod=E unk=U'")
    fields = {}
    for part in header[2:]:
        key, _, value = part.partition("=")
        if not value.isdigit():
            fail(1, f"bad header field {part!r}")
        fields[key] = int(value)
    if sorted(fields) != ["eod", "merges", "tokens", "unk"]:
        fail(1, f"bad header fields {sorted(fields)}")
    n_tokens, n_merges = fields["tokens"], fields["merges"]
    if len(lines) != 1 + n_tokens + 1 + n_merges:
        fail(len(lines), f"expected {1 + n_tokens + 1 + n_merges} lines, found {len(lines)}")

    tokens = []
    for i in range(n_tokens):
        lineno = 2 + i
        try:
            tokens.append(bytes.fromhex(lines[1 + i]))
        except ValueError:
            fail(lineno, f"token line is not hex: {lines[1 + i]!r}")
    if lines[1 + n_tokens] != "merges":
        fail(2 + n_tokens, "expected 'merges' section marker")
    merges = []
    for k in range(n_merges):
        lineno = 3 + n_tokens + k
        parts = lines[2 + n_tokens + k].split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            fail(lineno, f"merge line must be two ids: {lines[2 + n_tokens + k]!r}")
        merges.append((int(parts[0]), int(parts[1])))

    try:
        return Vocab(tokens=tokens, merges=merges, eod_id=fields["eod"], unk_id=fields["unk"])
    except DataError as exc:
        raise ParseError(f"{path}: inconsistent vocabulary: {exc}") from exc


def vocab_hash(vocab: Vocab) -> str:
    """Stable identity of a vocabulary, used to guard checkpoint resumption."""
    return hashlib.sha256(serialize_vocab(vocab).encode("ascii")).hexdigest()
