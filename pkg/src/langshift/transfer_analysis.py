"""Quantitative artifacts over completed training plans.

Takes the per-stage TransferRecords that training emits and produces the
derived tables and series: the plan-by-language loss matrix, forward and
backward transfer curves, cumulative loss, the loss-vs-forgetting trade-off,
factor tables, and correlation coefficients. emit_report renders everything
to CSV, JSON, and SVG deterministically.
"""

from __future__ import annotations

import json
import math
import os

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.stats

from .bpe import Vocab
from .corpus import LanguageCorpus, pack_eval
from .errors import DataError, InputError, ParseError
from .model import ModelParams, sequence_losses
from .shiftmetrics import ContaminationMatrix, SimilarityTable
from .svgplot import Series, line_chart, scatter_chart
from .trainer import TransferRecord

REPORT_SCHEMA = "langshift-report/v1"


def plan_languages(plan_id: str) -> list[str]:
    """Languages of a plan id, in stage order ("+" marks a joint plan)."""
    if not plan_id:
        raise InputError("empty plan id")
    if "+" in plan_id:
        return plan_id.split("+")
    return plan_id.split("-")


def is_joint(plan_id: str) -> bool:
    return "+" in plan_id


def n_plan_stages(plan_id: str) -> int:
    return 1 if is_joint(plan_id) else len(plan_languages(plan_id))


# ---------------------------------------------------------------------------
# Evaluation


def eval_loss(params: ModelParams, testset, vocab: Vocab | None = None) -> float:
    """Mean next-token cross-entropy over a packed test set.

    testset is either a corpus (packed here, which needs the vocab) or an
    already-packed 2-D array of token rows. The mean is taken per row and
    rows all have equal length, so the value equals the mean over all
    next-token positions and does not depend on batching.
    """
    if isinstance(testset, LanguageCorpus):
        if vocab is None:
            raise InputError("packing a corpus testset needs the vocabulary")
        packed = pack_eval(testset, vocab, params.config.seq_len + 1)
        if not packed:
            raise InputError(f"testset {testset.language!r} packs to zero rows")
        rows = np.asarray(packed)
    else:
        rows = np.asarray(testset)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise InputError(f"testset must be non-empty packed rows, got shape {rows.shape}")
    return float(np.mean(sequence_losses(params, rows)))


# ---------------------------------------------------------------------------
# Transfer matrix


@dataclass
class TransferMatrix:
    """Plan-by-language table of final-stage test losses.

    cells holds the final-stage losses; stages keeps every intermediate
    (plan, stage, language) slice. Cells a plan never evaluated are simply
    absent and render as "-".
    """

    plans: list[str]
    languages: list[str]
    cells: dict[tuple[str, str], float]
    stages: dict[tuple[str, int, str], float] = field(default_factory=dict)

    def get(self, plan_id: str, language: str) -> float:
        if (plan_id, language) not in self.cells:
            raise KeyError(f"no cell for plan {plan_id!r}, language {language!r}")
        return self.cells[(plan_id, language)]

    def to_csv(self) -> str:
        lines = ["plan," + ",".join(self.languages)]
        for plan in self.plans:
            row = [plan]
            for lang in self.languages:
                v = self.cells.get((plan, lang))
                row.append("-" if v is None else f"{v:.2f}")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _group_records(records: list[TransferRecord]) -> dict[str, list[TransferRecord]]:
    """Group by plan, validate stage contiguity and uniqueness."""
    by_plan: dict[str, list[TransferRecord]] = {}
    for r in records:
        by_plan.setdefault(r.plan_id, []).append(r)
    for plan_id, rs in by_plan.items():
        seen = {}
        for r in rs:
            key = r.stage_index
            if key in seen:
                if seen[key].seed != r.seed:
                    raise DataError(
                        f"plan {plan_id}: stage {key} present for seeds "
                        f"{seen[key].seed} and {r.seed}; analyze one seed at a time"
                    )
                raise DataError(f"plan {plan_id}: duplicate record for stage {key}")
            seen[key] = r
        total = n_plan_stages(plan_id)
        idx = sorted(seen)
        if idx[0] < 1 or idx[-1] > total:
            raise DataError(f"plan {plan_id}: stage indices {idx} outside 1..{total}")
        if idx != list(range(idx[0], idx[-1] + 1)):
            raise DataError(f"plan {plan_id}: stage gap in {idx}")
        rs.sort(key=lambda r: r.stage_index)
    return by_plan


def build_transfer_matrix(
    records: list[TransferRecord], languages: list[str] | None = None
) -> TransferMatrix:
    """Final-stage losses per plan, with per-stage slices retained.

    Each plan needs its final-stage record. Column order defaults to first
    appearance across the plan ids, extended by any extra languages the
    records evaluate; passing languages explicitly instead makes a loss on
    a language outside that list an error, never a silently dropped cell.
    """
    if not records:
        raise InputError("no records")
    by_plan = _group_records(records)
    plans = list(by_plan)
    grow_columns = languages is None
    if grow_columns:
        languages = []
        for plan_id in plans:
            for lang in plan_languages(plan_id):
                if lang not in languages:
                    languages.append(lang)
    cells: dict[tuple[str, str], float] = {}
    stages: dict[tuple[str, int, str], float] = {}
    for plan_id, rs in by_plan.items():
        final_stage = n_plan_stages(plan_id)
        if rs[-1].stage_index != final_stage:
            raise DataError(f"plan {plan_id}: final stage {final_stage} missing")
        for r in rs:
            for lang, loss in r.losses.items():
                if not math.isfinite(loss):
                    raise DataError(f"plan {plan_id} stage {r.stage_index}: non-finite loss on {lang}")
                stages[(plan_id, r.stage_index, lang)] = float(loss)
                if lang not in languages:
                    if not grow_columns:
                        raise DataError(f"plan {plan_id}: no column for language {lang!r}")
                    languages.append(lang)
        for lang, loss in rs[-1].losses.items():
            cells[(plan_id, lang)] = float(loss)
    return TransferMatrix(plans=plans, languages=languages, cells=cells, stages=stages)


def _reference_text(path) -> tuple[str, str]:
    if path is None:
        name = "reference_losses.csv"
        return resources.files("langshift.data").joinpath(name).read_text("utf-8"), name
    with open(path, "r", encoding="utf-8") as f:
        return f.read(), str(path)


def load_reference_losses(model_size: str, path=None) -> list[TransferRecord]:
    """Shipped en/da/is/no study results as final-stage records.

    The packaged table covers model sizes 126m, 356m, and 1.3b over the 20
    plans of the four-language study (4 monolingual, 1 joint, 15 sequential).
    """
    text, origin = _reference_text(path)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header[:2] != ["model", "plan"]:
        raise ParseError(f"{origin}:1: expected 'model,plan,<languages>' header")
    langs = header[2:]
    sizes = set()
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"{origin}:{lineno}: expected {len(header)} fields")
        sizes.add(parts[0])
        if parts[0] != model_size:
            continue
        plan_id = parts[1]
        losses = {}
        for lang, cell in zip(langs, parts[2:]):
            if cell == "-":
                continue
            try:
                losses[lang] = float(cell)
            except ValueError:
                raise ParseError(f"{origin}:{lineno}: bad loss {cell!r}") from None
        records.append(
            TransferRecord(
                plan_id=plan_id,
                stage_index=n_plan_stages(plan_id),
                language=plan_id if is_joint(plan_id) else plan_languages(plan_id)[-1],
                losses=losses,
            )
        )
    if not records:
        raise InputError(f"{origin}: no rows for model {model_size!r}; has {sorted(sizes)}")
    return records


# ---------------------------------------------------------------------------
# Transfer series


def forward_transfer(
    records: list[TransferRecord], baselines: dict[str, float]
) -> dict[str, list[tuple[int, float, list[float]]]]:
    """Loss on each language by the stage position where it was trained.

    Position 1 is the monolingual baseline (a plan's first stage is that
    language's monolingual run by construction). Later positions average the
    stage-end loss across every sequential plan that trains the language
    there; the per-plan values ride along for inspection. Positions no plan
    exercises are absent rather than zero.
    """
    buckets: dict[tuple[str, int], list[float]] = {}
    for r in records:
        if is_joint(r.plan_id) or r.stage_index < 2:
            continue
        lang = r.language
        if lang not in r.losses:
            raise DataError(
                f"plan {r.plan_id} stage {r.stage_index}: no loss on its own language {lang!r}"
            )
        buckets.setdefault((lang, r.stage_index), []).append(float(r.losses[lang]))
    languages = sorted({lang for lang, _ in buckets} | set(baselines))
    series: dict[str, list[tuple[int, float, list[float]]]] = {}
    for lang in languages:
        if lang not in baselines:
            raise InputError(f"no monolingual baseline for {lang!r}")
        pts = [(1, float(baselines[lang]), [float(baselines[lang])])]
        positions = sorted(k for (l, k) in buckets if l == lang)
        for k in positions:
            vals = buckets[(lang, k)]
            pts.append((k, sum(vals) / len(vals), vals))
        series[lang] = pts
    return series


def backward_series(
    records: list[TransferRecord], language: str | None = None
) -> dict[str, list[tuple[int, float, list[float]]]]:
    """Loss on each language by how many stages followed its own.

    Suffix 0 is the loss at the end of the language's own stage; suffix s
    averages the loss after s further stages, pooled across plans (and, for
    full per-stage record sets, across the stages within each plan).
    """
    buckets: dict[tuple[str, int], list[float]] = {}
    for r in records:
        if is_joint(r.plan_id):
            continue
        langs = plan_languages(r.plan_id)
        for pos, lang in enumerate(langs, start=1):
            if pos > r.stage_index or lang not in r.losses:
                continue
            buckets.setdefault((lang, r.stage_index - pos), []).append(float(r.losses[lang]))
    series: dict[str, list[tuple[int, float, list[float]]]] = {}
    for lang in sorted({lang for lang, _ in buckets}):
        pts = []
        for suffix in sorted(s for (l, s) in buckets if l == lang):
            vals = buckets[(lang, suffix)]
            pts.append((suffix, sum(vals) / len(vals), vals))
        series[lang] = pts
    if language is not None:
        if language not in series:
            raise InputError(f"{language!r} is not trained anywhere in these records")
        return {language: series[language]}
    return series


def cumulative_loss(
    records: list[TransferRecord], languages: list[str] | None = None
) -> dict[str, float]:
    """Final-stage loss summed over test languages, per plan."""
    by_plan = _group_records(records)
    out: dict[str, float] = {}
    for plan_id, rs in by_plan.items():
        final = rs[-1]
        if final.stage_index != n_plan_stages(plan_id):
            raise DataError(f"plan {plan_id}: final stage missing")
        if languages is None:
            out[plan_id] = float(sum(final.losses.values()))
        else:
            missing = [lang for lang in languages if lang not in final.losses]
            if missing:
                raise DataError(f"plan {plan_id}: final record lacks losses for {missing}")
            out[plan_id] = float(sum(final.losses[lang] for lang in languages))
    return out


@dataclass(frozen=True)
class TradeoffPoint:
    """One stage's position in the loss-vs-forgetting plane.

    forgetting is the summed, signed loss growth on every earlier language
    since the end of its own stage; negative values mean the earlier
    languages improved.
    """

    plan_id: str
    seed: int
    stage_index: int
    language: str
    current_loss: float
    forgetting: float


def forgetting_tradeoff(records: list[TransferRecord]) -> list[TradeoffPoint]:
    """Current-language loss vs summed loss growth on earlier languages.

    Needs the full per-stage record set of each sequential plan; one point
    per stage from the second onward. Joint plans contribute nothing.
    """
    by_run: dict[tuple[str, int], dict[int, TransferRecord]] = {}
    for r in records:
        if is_joint(r.plan_id):
            continue
        run = by_run.setdefault((r.plan_id, r.seed), {})
        if r.stage_index in run:
            raise DataError(f"plan {r.plan_id} seed {r.seed}: duplicate stage {r.stage_index}")
        run[r.stage_index] = r
    points: list[TradeoffPoint] = []
    for (plan_id, seed), run in by_run.items():
        langs = plan_languages(plan_id)
        missing = [k for k in range(1, len(langs) + 1) if k not in run]
        if missing:
            raise DataError(f"plan {plan_id} seed {seed}: missing stages {missing}")
        for k in range(2, len(langs) + 1):
            rec = run[k]
            cur = langs[k - 1]
            if cur not in rec.losses:
                raise DataError(f"plan {plan_id} stage {k}: no loss on {cur!r}")
            growth = 0.0
            for j in range(1, k):
                prev = langs[j - 1]
                if prev not in rec.losses or prev not in run[j].losses:
                    raise DataError(f"plan {plan_id}: stage {k} or {j} lacks loss on {prev!r}")
                growth += rec.losses[prev] - run[j].losses[prev]
            points.append(
                TradeoffPoint(
                    plan_id=plan_id,
                    seed=seed,
                    stage_index=k,
                    language=cur,
                    current_loss=float(rec.losses[cur]),
                    forgetting=float(growth),
                )
            )
    points.sort(key=lambda p: (p.plan_id, p.seed, p.stage_index))
    return points


# ---------------------------------------------------------------------------
# Factors and correlation


@dataclass
class FactorTable:
    """Per ordered language pair (earlier, later): similarity and
    contamination factors, complete for every pair it was built over."""

    pairs: list[tuple[str, str]]
    factors: dict[str, dict[tuple[str, str], float]]

    def value(self, factor: str, pair: tuple[str, str]) -> float:
        if factor not in self.factors:
            raise KeyError(f"no factor {factor!r}; have {sorted(self.factors)}")
        if pair not in self.factors[factor]:
            raise KeyError(f"factor {factor!r} has no pair {pair}")
        return self.factors[factor][pair]

    def to_csv(self) -> str:
        names = sorted(self.factors)
        lines = ["earlier,later," + ",".join(names)]
        for pair in self.pairs:
            cells = [f"{self.factors[n][pair]:.6g}" for n in names]
            lines.append(f"{pair[0]},{pair[1]}," + ",".join(cells))
        return "\n".join(lines) + "\n"


def build_factor_table(
    pairs: list[tuple[str, str]],
    distances: dict[str, SimilarityTable],
    contamination: ContaminationMatrix | None = None,
) -> FactorTable:
    """Assemble the per-pair factor columns.

    distances supplies one symmetric table per metric name; contamination,
    when given, adds the two directional shares: cont_earlier_in_later is
    the percentage of the later corpus classified as the earlier language,
    and vice versa.
    """
    if not pairs:
        raise InputError("no language pairs")
    factors: dict[str, dict[tuple[str, str], float]] = {}
    for metric, table in sorted(distances.items()):
        col = {}
        for a, b in pairs:
            try:
                col[(a, b)] = table.get(a, b)
            except KeyError as exc:
                raise DataError(f"factor {metric}: {exc}") from exc
        factors[metric] = col
    if contamination is not None:
        early, late = {}, {}
        for a, b in pairs:
            try:
                early[(a, b)] = contamination.get(b, a)
                late[(a, b)] = contamination.get(a, b)
            except KeyError as exc:
                raise DataError(f"contamination factor: {exc}") from exc
        factors["cont_earlier_in_later"] = early
        factors["cont_later_in_earlier"] = late
    return FactorTable(pairs=list(pairs), factors=factors)


def pearson(xs, ys) -> float | None:
    """Pearson's r, or None when either side is constant.

    Each centered vector is scaled by its own max magnitude first, which
    pins the squared sums into [1, n] so the denominator can neither
    underflow nor overflow. Identical inputs give exactly 1.0: the scaled
    vectors coincide bitwise, the numerator equals the squared sum, and
    sqrt(s * s) recovers s exactly in IEEE arithmetic.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"pearson needs two equal 1-D arrays, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise InputError(f"need at least 3 points, got {x.size}")
    xm = x - x.mean()
    ym = y - y.mean()
    mx = float(np.max(np.abs(xm)))
    my = float(np.max(np.abs(ym)))
    if mx == 0.0 or my == 0.0:
        return None
    xm /= mx
    ym /= my
    sxx = float(xm @ xm)
    syy = float(ym @ ym)
    r = float(xm @ ym) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman(xs, ys) -> float | None:
    """Spearman's rho: Pearson over average ranks (ties averaged)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"spearman needs two equal 1-D arrays, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise InputError(f"need at least 3 points, got {x.size}")
    return pearson(scipy.stats.rankdata(x), scipy.stats.rankdata(y))


@dataclass(frozen=True)
class Correlation:
    factor: str
    pearson: float | None
    spearman: float | None
    n: int


def correlate(
    deltas: dict[tuple[str, str], float], factors: FactorTable
) -> dict[str, Correlation]:
    """Correlate per-pair outcome deltas against every factor column.

    Pairs are taken from the deltas and must all be present in the factor
    table. Constant columns leave the coefficients as None rather than a
    made-up number.
    """
    pairs = sorted(deltas)
    if len(pairs) < 3:
        raise InputError(f"need at least 3 pairs, got {len(pairs)}")
    ys = [float(deltas[p]) for p in pairs]
    out: dict[str, Correlation] = {}
    for name in sorted(factors.factors):
        xs = [factors.value(name, p) for p in pairs]
        out[name] = Correlation(
            factor=name,
            pearson=pearson(xs, ys),
            spearman=spearman(xs, ys),
            n=len(pairs),
        )
    return out


# ---------------------------------------------------------------------------
# Report emission


@dataclass
class ReportBundle:
    """Everything emit_report knows how to render; leave fields None to skip."""

    title: str = "transfer report"
    matrix: TransferMatrix | None = None
    forward: dict[str, list[tuple[int, float, list[float]]]] | None = None
    backward: dict[str, list[tuple[int, float, list[float]]]] | None = None
    cumulative: dict[str, float] | None = None
    tradeoff: list[TradeoffPoint] | None = None
    factors: FactorTable | None = None
    correlations: dict[str, Correlation] | None = None


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _series_csv(series: dict[str, list[tuple[int, float, list[float]]]], xname: str) -> str:
    lines = [f"language,{xname},mean_loss,n_runs"]
    for lang in sorted(series):
        for x, mean, vals in series[lang]:
            lines.append(f"{lang},{x},{mean:.6f},{len(vals)}")
    return "\n".join(lines) + "\n"


def _series_json(series: dict[str, list[tuple[int, float, list[float]]]], xname: str):
    return {
        lang: [{xname: x, "mean_loss": mean, "values": vals} for x, mean, vals in pts]
        for lang, pts in sorted(series.items())
    }


def _series_svg(series, title: str, xlabel: str) -> str:
    plots = [
        Series(name=lang, xs=[float(x) for x, _, _ in pts], ys=[m for _, m, _ in pts])
        for lang, pts in sorted(series.items())
    ]
    return line_chart(plots, title=title, xlabel=xlabel, ylabel="test loss")


def emit_report(bundle: ReportBundle, outdir, timestamp: str | None = None) -> list[str]:
    """Write every present artifact under outdir; returns the file names.

    All bytes are rendered before anything touches the disk, so a failure
    leaves no partial report, and output for identical inputs is
    byte-identical (pass a timestamp only if drift across emissions is
    acceptable).
    """
    files: dict[str, bytes] = {}

    if bundle.matrix is not None:
        files["transfer_matrix.csv"] = bundle.matrix.to_csv().encode("utf-8")
        files["transfer_matrix.json"] = _json_bytes(
            {
                "plans": bundle.matrix.plans,
                "languages": bundle.matrix.languages,
                "cells": [
                    {"plan": p, "language": l, "loss": v}
                    for (p, l), v in sorted(bundle.matrix.cells.items())
                ],
                "stages": [
                    {"plan": p, "stage": s, "language": l, "loss": v}
                    for (p, s, l), v in sorted(bundle.matrix.stages.items())
                ],
            }
        )
    if bundle.forward is not None:
        files["forward_transfer.csv"] = _series_csv(bundle.forward, "position").encode("utf-8")
        files["forward_transfer.json"] = _json_bytes(_series_json(bundle.forward, "position"))
        files["forward_transfer.svg"] = _series_svg(
            bundle.forward, "Loss by stage position", "stage position"
        ).encode("utf-8")
    if bundle.backward is not None:
        files["backward_transfer.csv"] = _series_csv(bundle.backward, "suffix").encode("utf-8")
        files["backward_transfer.json"] = _json_bytes(_series_json(bundle.backward, "suffix"))
        files["backward_transfer.svg"] = _series_svg(
            bundle.backward, "Loss by suffix length", "stages after the language"
        ).encode("utf-8")
    if bundle.cumulative is not None:
        lines = ["plan,cumulative_loss"]
        for plan in sorted(bundle.cumulative):
            lines.append(f"{plan},{bundle.cumulative[plan]:.6f}")
        files["cumulative_loss.csv"] = ("\n".join(lines) + "\n").encode("utf-8")
        files["cumulative_loss.json"] = _json_bytes(dict(sorted(bundle.cumulative.items())))
        plans = sorted(bundle.cumulative)
        files["cumulative_loss.svg"] = scatter_chart(
            [
                Series(
                    name="plans",
                    xs=[float(i + 1) for i in range(len(plans))],
                    ys=[bundle.cumulative[p] for p in plans],
                    labels=plans,
                )
            ],
            title="Cumulative final loss per plan",
            xlabel="plan (sorted)",
            ylabel="summed test loss",
        ).encode("utf-8")
    if bundle.tradeoff is not None:
        lines = ["plan,seed,stage,language,current_loss,forgetting"]
        for p in bundle.tradeoff:
            lines.append(
                f"{p.plan_id},{p.seed},{p.stage_index},{p.language},"
                f"{p.current_loss:.6f},{p.forgetting:.6f}"
            )
        files["forgetting_tradeoff.csv"] = ("\n".join(lines) + "\n").encode("utf-8")
        files["forgetting_tradeoff.json"] = _json_bytes(
            [
                {
                    "plan": p.plan_id,
                    "seed": p.seed,
                    "stage": p.stage_index,
                    "language": p.language,
                    "current_loss": p.current_loss,
                    "forgetting": p.forgetting,
                }
                for p in bundle.tradeoff
            ]
        )
        if bundle.tradeoff:
            by_lang: dict[str, list[TradeoffPoint]] = {}
            for p in bundle.tradeoff:
                by_lang.setdefault(p.language, []).append(p)
            files["forgetting_tradeoff.svg"] = scatter_chart(
                [
                    Series(
                        name=lang,
                        xs=[p.current_loss for p in pts],
                        ys=[p.forgetting for p in pts],
                        labels=[f"{p.plan_id} stage {p.stage_index}" for p in pts],
                    )
                    for lang, pts in sorted(by_lang.items())
                ],
                title="Current loss vs forgetting",
                xlabel="current-language test loss",
                ylabel="summed loss growth on earlier languages",
            ).encode("utf-8")
    if bundle.factors is not None:
        files["factor_table.csv"] = bundle.factors.to_csv().encode("utf-8")
        files["factor_table.json"] = _json_bytes(
            [
                {"earlier": a, "later": b}
                | {name: bundle.factors.factors[name][(a, b)] for name in sorted(bundle.factors.factors)}
                for a, b in bundle.factors.pairs
            ]
        )
    if bundle.correlations is not None:
        lines = ["factor,pearson,spearman,n_pairs"]
        for name in sorted(bundle.correlations):
            c = bundle.correlations[name]
            pv = "" if c.pearson is None else f"{c.pearson:.6f}"
            sv = "" if c.spearman is None else f"{c.spearman:.6f}"
            lines.append(f"{name},{pv},{sv},{c.n}")
        files["correlations.csv"] = ("\n".join(lines) + "\n").encode("utf-8")
        files["correlations.json"] = _json_bytes(
            {
                name: {"pearson": c.pearson, "spearman": c.spearman, "n_pairs": c.n}
                for name, c in sorted(bundle.correlations.items())
            }
        )

    names = sorted(files)
    index = [f"# {bundle.title}", ""]
    if timestamp:
        index += [f"Generated: {timestamp}", ""]
    index.append(f"{len(names)} artifacts:" if names else "No artifacts.")
    index += [f"- `{n}`" for n in names]
    files["index.md"] = ("\n".join(index) + "\n").encode("utf-8")
    files["report.json"] = _json_bytes(
        {"schema": REPORT_SCHEMA, "title": bundle.title, "files": names}
        | ({"timestamp": timestamp} if timestamp else {})
    )

    os.makedirs(outdir, exist_ok=True)
    if not os.access(outdir, os.W_OK):
        raise OSError(f"output directory {outdir} is not writable")
    for name, blob in sorted(files.items()):
        with open(os.path.join(outdir, name), "wb") as f:
            f.write(blob)
    return sorted(files)
