"""Continual training: stages, plans, checkpoints, and the LR schedule.

A plan is an ordered list of single-language stages (or one merged joint
stage). Model parameters hand off from stage to stage; optimizer moments are
reset and the learning-rate schedule restarts at every stage boundary. All
randomness flows through RngState children derived from the plan seed, so a
plan is a pure function of (plan, corpora, vocab) and two runs are bitwise
identical on the same machine.

Checkpoints are single files: a UTF-8 JSON header line, the raw little-endian
float32 parameter and moment blocks in canonical order, and a sha256 footer
line over everything before it.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
import os

from dataclasses import dataclass, field, replace

import numpy as np

from .bpe import Vocab, vocab_hash
from .corpus import LanguageCorpus, pack_stream
from .errors import (
    ConfigError,
    InputError,
    IntegrityError,
    NonFiniteError,
    ParameterError,
    ParseError,
    TrainingDiverged,
)
from .model import ModelConfig, ModelParams, init_model, loss_and_grads, sequence_losses
from .numerics import AdamHyper, RngState, adam_step

CHECKPOINT_FORMAT = "langshift-ckpt/v1"


@dataclass(frozen=True)
class StageSpec:
    """One training stage: a language, a step budget, and its LR schedule."""

    language: str
    steps: int
    batch_size: int
    max_lr: float
    min_lr: float
    warmup_steps: int
    tail_steps: int

    def validate(self) -> None:
        if not self.language:
            raise ConfigError("stage needs a language")
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError(f"steps and batch_size must be positive: {self}")
        if not (0 < self.min_lr <= self.max_lr):
            raise ConfigError(f"need 0 < min_lr <= max_lr, got {self.min_lr}, {self.max_lr}")
        if self.warmup_steps < 0 or self.tail_steps < 0:
            raise ConfigError("warmup and tail must be nonnegative")
        if self.warmup_steps + self.tail_steps > self.steps:
            raise ConfigError(
                f"warmup {self.warmup_steps} + tail {self.tail_steps} exceed {self.steps} steps"
            )


def lr_at(step: int, stage: StageSpec) -> float:
    """Learning rate at a 0-based step of a stage.

    Linear 0 -> max_lr over [0, warmup); cosine max_lr -> min_lr over
    [warmup, steps - tail); constant min_lr for the final tail. The cosine
    is written as max_lr minus a raised-cosine drop so lr(warmup) == max_lr
    exactly; the constant branch makes lr(steps - tail) == min_lr exactly.
    """
    stage.validate()
    if step < 0 or step >= stage.steps:
        raise ParameterError(f"step {step} outside stage of {stage.steps} steps")
    if step < stage.warmup_steps:
        return stage.max_lr * step / stage.warmup_steps
    if step >= stage.steps - stage.tail_steps:
        return stage.min_lr
    span = stage.steps - stage.tail_steps - stage.warmup_steps
    progress = (step - stage.warmup_steps) / span
    return stage.max_lr - 0.5 * (stage.max_lr - stage.min_lr) * (1.0 - math.cos(math.pi * progress))


@dataclass(frozen=True)
class ExperimentPlan:
    """A language order (or joint mixture) plus everything needed to run it."""

    mode: str  # "sequential" or "joint"
    languages: tuple[str, ...]
    model: ModelConfig
    template: StageSpec
    seed: int = 0
    eval_every: int | None = None

    def validate(self) -> None:
        if self.mode not in ("sequential", "joint"):
            raise ConfigError(f"unknown plan mode {self.mode!r}")
        if not self.languages:
            raise ConfigError("plan needs at least one language")
        if len(set(self.languages)) != len(self.languages):
            raise ConfigError(f"duplicate languages in plan: {self.languages}")
        self.model.validate()
        # the template's language field is filled per stage, so validate a stand-in
        replace(self.template, language=self.template.language or "stage").validate()
        if self.eval_every is not None and self.eval_every < 1:
            raise ConfigError("eval_every must be positive when set")

    @property
    def plan_id(self) -> str:
        sep = "+" if self.mode == "joint" else "-"
        return sep.join(self.languages)

    def stages(self) -> list[StageSpec]:
        """Concrete stages: one per language, or one merged joint stage.

        The joint stage runs languages * template.steps so the joint model
        sees as many tokens as the full sequential run.
        """
        self.validate()
        if self.mode == "sequential":
            return [replace(self.template, language=lang) for lang in self.languages]
        joint = replace(
            self.template,
            language=self.plan_id,
            steps=self.template.steps * len(self.languages),
        )
        return [joint]

    def fingerprint(self) -> str:
        blob = json.dumps(
            {
                "mode": self.mode,
                "languages": list(self.languages),
                "model": self.model.__dict__ | {},
                "template": self.template.__dict__ | {},
                "seed": self.seed,
            },
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(blob.encode()).hexdigest()


def enumerate_plans(
    first: str,
    others: list[str],
    model: ModelConfig,
    template: StageSpec,
    seed: int = 0,
    eval_every: int | None = None,
) -> list[ExperimentPlan]:
    """Every sequential order that starts with `first`.

    All non-empty ordered arrangements of `others` are appended to the fixed
    first language: 3 follow-on languages give 3 + 6 + 6 = 15 plans. Order of
    enumeration is by suffix length, then lexicographic, so it is stable.
    """
    if first in others:
        raise ConfigError(f"first language {first!r} repeated in others")
    if len(set(others)) != len(others):
        raise ConfigError(f"duplicate languages in others: {others}")
    if not others:
        raise ConfigError("need at least one follow-on language")
    plans = []
    for r in range(1, len(others) + 1):
        for perm in itertools.permutations(sorted(others), r):
            plans.append(
                ExperimentPlan(
                    mode="sequential",
                    languages=(first, *perm),
                    model=model,
                    template=template,
                    seed=seed,
                    eval_every=eval_every,
                )
            )
    return plans


@dataclass
class TransferRecord:
    """Evaluation snapshot after one stage: losses on every language's testset."""

    plan_id: str
    stage_index: int  # 1-based position in the plan
    language: str  # language just trained
    losses: dict[str, float]
    seed: int = 0


@dataclass
class Checkpoint:
    """Model state plus everything needed to resume bit-for-bit.

    rng is the stage's data-stream state: seed of the stream and the number
    of batches already consumed. Optimizer moments live inside params.
    """

    params: ModelParams
    stage_index: int
    stage_step: int
    global_step: int
    stage_language: str
    rng: RngState
    tokenizer_hash: str = ""
    plan_fingerprint: str = ""


def checkpoints_equal(a: Checkpoint, b: Checkpoint) -> bool:
    """Bitwise equality of parameters, moments, and bookkeeping."""
    if (
        a.params.config != b.params.config
        or a.stage_index != b.stage_index
        or a.stage_step != b.stage_step
        or a.global_step != b.global_step
        or a.stage_language != b.stage_language
        or a.rng != b.rng
        or a.tokenizer_hash != b.tokenizer_hash
    ):
        return False
    for name in a.params.names():
        pa, pb = a.params[name], b.params[name]
        if not (
            np.array_equal(pa.value.data, pb.value.data)
            and np.array_equal(pa.first_moment.data, pb.first_moment.data)
            and np.array_equal(pa.second_moment.data, pb.second_moment.data)
        ):
            return False
    return True


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write header line, raw float32 blocks, sha256 footer line."""
    cfg = ckpt.params.config
    header = {
        "format": CHECKPOINT_FORMAT,
        "config": {k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
        "stage_index": ckpt.stage_index,
        "stage_step": ckpt.stage_step,
        "global_step": ckpt.global_step,
        "stage_language": ckpt.stage_language,
        "rng": {"seed": ckpt.rng.seed, "counter": ckpt.rng.counter},
        "tokenizer_hash": ckpt.tokenizer_hash,
        "plan_fingerprint": ckpt.plan_fingerprint,
        "tensors": [
            {"name": n, "shape": list(ckpt.params[n].shape)} for n in ckpt.params.names()
        ],
    }
    buf = io.BytesIO()
    buf.write(json.dumps(header, sort_keys=True).encode("utf-8"))
    buf.write(b"\n")
    for name in ckpt.params.names():
        p = ckpt.params[name]
        for arr in (p.value.data, p.first_moment.data, p.second_moment.data):
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    payload = buf.getvalue()
    digest = hashlib.sha256(payload).hexdigest()
    with open(path, "wb") as f:
        f.write(payload)
        f.write(f"\nsha256:{digest}\n".encode("ascii"))


def load_checkpoint(path) -> Checkpoint:
    """Read and verify a checkpoint; any corruption raises IntegrityError."""
    with open(path, "rb") as f:
        blob = f.read()
    tail = blob.rfind(b"\nsha256:")
    if tail < 0:
        raise ParseError(f"{path}: missing checksum footer")
    payload, footer = blob[:tail], blob[tail + 1 :]
    stated = footer.decode("ascii", errors="replace").strip().removeprefix("sha256:")
    actual = hashlib.sha256(payload).hexdigest()
    if stated != actual:
        raise IntegrityError(f"{path}: checksum mismatch: stated {stated[:12]}.., actual {actual[:12]}..")

    newline = payload.find(b"\n")
    if newline < 0:
        raise ParseError(f"{path}: missing header line")
    try:
        header = json.loads(payload[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: bad header: {exc}") from exc
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path}: unknown format {header.get('format')!r}")

    cfg = ModelConfig(**header["config"])
    body = payload[newline + 1 :]
    tensors: dict[str, np.ndarray] = {}
    moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        block = []
        for _ in range(3):
            if offset + nbytes > len(body):
                raise ParseError(f"{path}: truncated tensor block for {entry['name']}")
            block.append(
                np.frombuffer(body[offset : offset + nbytes], dtype="<f4").reshape(shape).copy()
            )
            offset += nbytes
        tensors[entry["name"]] = block[0]
        moments[entry["name"]] = (block[1], block[2])
    if offset != len(body):
        raise ParseError(f"{path}: {len(body) - offset} trailing bytes after tensors")

    params = ModelParams(cfg, tensors)
    for name, (m, v) in moments.items():
        params[name].first_moment.data[...] = m
        params[name].second_moment.data[...] = v
    return Checkpoint(
        params=params,
        stage_index=int(header["stage_index"]),
        stage_step=int(header["stage_step"]),
        global_step=int(header["global_step"]),
        stage_language=header["stage_language"],
        rng=RngState(int(header["rng"]["seed"]), int(header["rng"]["counter"])),
        tokenizer_hash=header["tokenizer_hash"],
        plan_fingerprint=header["plan_fingerprint"],
    )


@dataclass
class BatchSource:
    """Deterministic packed-batch stream for one stage.

    Rows are row_len ids (model seq_len + 1, so every position yields one
    prediction); stream(skip) replays the stream from scratch and discards
    the first `skip` batches, which is how resumption realigns the data.
    """

    corpus: LanguageCorpus
    vocab: Vocab
    row_len: int
    batch_size: int
    seed: int

    def stream(self, skip: int = 0):
        rows = pack_stream(self.corpus, self.vocab, self.row_len, RngState(self.seed))
        for _ in range(skip * self.batch_size):
            next(rows)
        while True:
            yield np.stack([next(rows) for _ in range(self.batch_size)])


@dataclass
class StageResult:
    checkpoint: Checkpoint
    curve: list[tuple[int, float, float]]  # (step, train_loss, lr)
    record: TransferRecord
    val_curve: list[tuple[int, float]] = field(default_factory=list)


def run_stage(
    start,
    stage: StageSpec,
    data,
    testsets: dict[str, list] | None,
    *,
    vocab: Vocab | None = None,
    plan_id: str = "",
    stage_index: int = 1,
    global_step_offset: int = 0,
    plan_fingerprint: str = "",
    seed: int = 0,
    eval_every: int | None = None,
    val_rows=None,
    stop_after: int | None = None,
    log=None,
) -> StageResult:
    """Train one stage and evaluate every testset language at its end.

    start is a fresh ModelParams or a Checkpoint; resuming from a mid-stage
    checkpoint replays the remaining steps exactly (the optimizer step index
    and the data stream pick up where they left off). stop_after interrupts
    the stage once that many steps in total have been taken, returning a
    resumable mid-stage checkpoint. A non-finite loss or gradient aborts
    with TrainingDiverged carrying the last good state.
    """
    stage.validate()
    if isinstance(start, Checkpoint):
        if vocab is not None and start.tokenizer_hash and vocab_hash(vocab) != start.tokenizer_hash:
            raise IntegrityError(
                f"checkpoint was trained with a different tokenizer "
                f"({start.tokenizer_hash[:12]}..); refusing to resume"
            )
        if start.stage_step > stage.steps:
            raise ConfigError(
                f"checkpoint is {start.stage_step} steps into a stage of {stage.steps}"
            )
        params = start.params
        first_step = start.stage_step
        stage_index = start.stage_index
        global_step_offset = start.global_step - start.stage_step
        plan_fingerprint = plan_fingerprint or start.plan_fingerprint
    elif isinstance(start, ModelParams):
        params = start
        first_step = 0
    else:
        raise ConfigError(f"start must be ModelParams or Checkpoint, got {type(start).__name__}")

    data_seed = getattr(data, "seed", 0)
    if hasattr(data, "stream"):
        stream = data.stream(skip=first_step)
    else:
        stream = iter(data)
    tok_hash = vocab_hash(vocab) if vocab is not None else ""

    def snapshot(done_steps: int) -> Checkpoint:
        return Checkpoint(
            params=params,
            stage_index=stage_index,
            stage_step=done_steps,
            global_step=global_step_offset + done_steps,
            stage_language=stage.language,
            rng=RngState(data_seed, done_steps),
            tokenizer_hash=tok_hash,
            plan_fingerprint=plan_fingerprint,
        )

    last_step = stage.steps
    if stop_after is not None:
        if stop_after <= first_step or stop_after > stage.steps:
            raise ParameterError(
                f"stop_after {stop_after} outside ({first_step}, {stage.steps}]"
            )
        last_step = stop_after

    parameters = params.parameters()
    curve: list[tuple[int, float, float]] = []
    val_curve: list[tuple[int, float]] = []
    for step in range(first_step, last_step):
        lr = lr_at(step, stage)
        try:
            batch = next(stream)
        except StopIteration:
            raise InputError(
                f"data stream for stage {stage.language!r} exhausted at step {step}"
            ) from None
        loss, grads = loss_and_grads(params, batch)
        if not math.isfinite(loss):
            raise TrainingDiverged(
                f"non-finite loss {loss!r} in stage {stage.language!r} at step {step}",
                checkpoint=snapshot(step),
            )
        for g in grads:
            if not np.all(np.isfinite(g.data)):
                raise TrainingDiverged(
                    f"non-finite gradient in stage {stage.language!r} at step {step}",
                    checkpoint=snapshot(step),
                )
        adam_step(parameters, grads, AdamHyper(lr=lr), t=step + 1)
        curve.append((step, loss, lr))
        if eval_every and val_rows is not None and (step + 1) % eval_every == 0:
            val_curve.append((step, float(np.mean(sequence_losses(params, val_rows)))))
        if log is not None and (step == first_step or (step + 1) % max(1, stage.steps // 10) == 0):
            log(f"[{plan_id or stage.language}] stage {stage_index} step {step + 1}/{stage.steps} loss {loss:.4f}")

    losses: dict[str, float] = {}
    if last_step == stage.steps:
        for lang in sorted(testsets or {}):
            losses[lang] = float(np.mean(sequence_losses(params, testsets[lang])))
    record = TransferRecord(
        plan_id=plan_id,
        stage_index=stage_index,
        language=stage.language,
        losses=losses,
        seed=seed,
    )
    return StageResult(snapshot(last_step), curve, record, val_curve)


def merge_corpora(corpora: dict[str, LanguageCorpus], languages: tuple[str, ...]) -> LanguageCorpus:
    """Joint mixture: every language equally likely, datasets namespaced."""
    if not languages:
        raise ConfigError("joint mixture needs languages")
    datasets: dict[str, list] = {}
    weights: dict[str, float] = {}
    share = 1.0 / len(languages)
    for lang in languages:
        corp = corpora[lang]
        for name, docs in corp.datasets.items():
            key = f"{lang}/{name}"
            datasets[key] = docs
            weights[key] = corp.weights[name] * share
    return LanguageCorpus("+".join(languages), datasets, weights)


@dataclass
class PlanResult:
    plan: ExperimentPlan
    records: list[TransferRecord]
    curves: list[list[tuple[int, float, float]]]
    val_curves: list[list[tuple[int, float]]]
    final: Checkpoint
    checkpoint_paths: list[str]


def write_curve_csv(curve, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write("step,train_loss,lr\n")
        for step, loss, lr in curve:
            f.write(f"{step},{loss:.9g},{lr:.9g}\n")


def run_plan(
    plan: ExperimentPlan,
    corpora: dict[str, LanguageCorpus],
    vocab: Vocab,
    testsets: dict[str, list],
    *,
    outdir=None,
    val_sets: dict[str, list] | None = None,
    init_params: ModelParams | None = None,
    log=None,
) -> PlanResult:
    """Run every stage of a plan from a fresh (or supplied) initialization.

    Parameters flow across stage boundaries; moments are reset and the LR
    schedule restarts. Each stage gets its own data stream seeded from the
    plan seed, the stage index, and the language. Missing corpora or testsets
    for any plan language fail before any training happens.
    """
    plan.validate()
    for lang in plan.languages:
        if lang not in corpora:
            raise ConfigError(f"plan {plan.plan_id}: no corpus for language {lang!r}")
        if lang not in testsets:
            raise ConfigError(f"plan {plan.plan_id}: no testset for language {lang!r}")

    rng = RngState(plan.seed)
    params = init_params if init_params is not None else init_model(plan.model, rng.child("init"))
    fingerprint = plan.fingerprint()
    row_len = plan.model.seq_len + 1

    records: list[TransferRecord] = []
    curves = []
    val_curves = []
    ckpt_paths: list[str] = []
    global_step = 0
    result = None
    for i, stage in enumerate(plan.stages(), start=1):
        if plan.mode == "joint":
            corpus = merge_corpora(corpora, plan.languages)
        else:
            corpus = corpora[stage.language]
        source = BatchSource(
            corpus=corpus,
            vocab=vocab,
            row_len=row_len,
            batch_size=stage.batch_size,
            seed=rng.child(f"data:{i}:{stage.language}").seed,
        )
        val_rows = None
        if val_sets is not None and plan.mode == "sequential":
            val_rows = val_sets.get(stage.language)
        result = run_stage(
            params,
            stage,
            source,
            testsets,
            vocab=vocab,
            plan_id=plan.plan_id,
            stage_index=i,
            global_step_offset=global_step,
            plan_fingerprint=fingerprint,
            seed=plan.seed,
            eval_every=plan.eval_every,
            val_rows=val_rows,
            log=log,
        )
        global_step = result.checkpoint.global_step
        records.append(result.record)
        curves.append(result.curve)
        val_curves.append(result.val_curve)
        if outdir is not None:
            os.makedirs(outdir, exist_ok=True)
            safe_lang = stage.language.replace("/", "_").replace("+", "_")
            path = os.path.join(outdir, f"stage{i}_{safe_lang}.ckpt")
            save_checkpoint(result.checkpoint, path)
            ckpt_paths.append(path)
            write_curve_csv(result.curve, os.path.join(outdir, f"curve_stage{i}.csv"))
        params = result.checkpoint.params
        params.reset_moments()

    return PlanResult(plan, records, curves, val_curves, result.checkpoint, ckpt_paths)
