"""Meta-evaluation statistics.

Correlations between automatic scores and human ratings (system level and
sample level), inter-annotator agreement, and the negotiation-bias metrics
that quantify run-to-run fluctuation of subscore ratios.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from scipy import stats as _scipy_stats

from .data import HumanRating
from .errors import CoverageError, DegenerateInputError


def _check_pair(x, y, minimum: int = 2) -> tuple[list[float], list[float]]:
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys):
        raise DegenerateInputError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < minimum:
        raise DegenerateInputError(f"need at least {minimum} points, got {len(xs)}")
    return xs, ys


def _has_variance(values: list[float]) -> bool:
    return max(values) > min(values)


def pearson(x, y) -> float:
    """Product-moment correlation."""
    xs, ys = _check_pair(x, y)
    if not _has_variance(xs) or not _has_variance(ys):
        raise DegenerateInputError("pearson undefined for zero-variance input")
    return float(_scipy_stats.pearsonr(xs, ys).statistic)


def spearman(x, y) -> float:
    """Pearson over average-ranked vectors (ties get the mean rank)."""
    xs, ys = _check_pair(x, y)
    if not _has_variance(xs) or not _has_variance(ys):
        raise DegenerateInputError("spearman undefined for zero-variance input")
    return float(_scipy_stats.spearmanr(xs, ys).statistic)


def kendall(x, y) -> float:
    """Tau-b: (concordant - discordant) / sqrt((n0 - Tx) (n0 - Ty))."""
    xs, ys = _check_pair(x, y)
    if not _has_variance(xs) or not _has_variance(ys):
        raise DegenerateInputError("kendall undefined for an all-tied vector")
    return float(_scipy_stats.kendalltau(xs, ys, variant="b").statistic)


def pearson_with_p(x, y) -> tuple[float, float]:
    """Correlation plus the two-sided t-approximation p-value."""
    xs, ys = _check_pair(x, y)
    if not _has_variance(xs) or not _has_variance(ys):
        raise DegenerateInputError("pearson undefined for zero-variance input")
    result = _scipy_stats.pearsonr(xs, ys)
    return float(result.statistic), float(result.pvalue)


def cohen_kappa(a, b) -> float:
    """Unweighted kappa: (p_o - p_e) / (1 - p_e) over categorical ratings."""
    if len(a) != len(b):
        raise DegenerateInputError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise DegenerateInputError("kappa needs at least one rating pair")
    n = len(a)
    observed = sum(1 for u, v in zip(a, b) if u == v) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    expected = sum(
        (counts_a[k] / n) * (counts_b[k] / n) for k in set(counts_a) | set(counts_b)
    )
    if expected >= 1.0:
        raise DegenerateInputError("kappa undefined when chance agreement is 1")
    return (observed - expected) / (1.0 - expected)


def average_human_scores(ratings: list[HumanRating]) -> dict[tuple[str, str], float]:
    """Mean rating per (task, system) across annotators."""
    sums: dict[tuple[str, str], list[int]] = {}
    for rating in ratings:
        sums.setdefault((rating.task_id, rating.system_id), []).append(rating.score)
    return {key: sum(vals) / len(vals) for key, vals in sums.items()}


@dataclass(frozen=True)
class SystemScoreTable:
    """Per-system means over an identical (task, system) coverage."""

    rows: dict[str, dict[str, float]]  # system -> {auto, human, n_samples}
    pearson: float
    kendall: float
    spearman: float

    def to_dict(self) -> dict:
        return {
            "systems": {k: dict(v) for k, v in sorted(self.rows.items())},
            "pearson": self.pearson,
            "kendall": self.kendall,
            "spearman": self.spearman,
        }


def system_level(
    auto_scores: dict[tuple[str, str], float], ratings: list[HumanRating]
) -> SystemScoreTable:
    """Correlate per-system mean automatic scores with per-system mean human
    ratings, computed over the shared (task, system) coverage."""
    human = average_human_scores(ratings)
    shared = sorted(set(auto_scores) & set(human))
    if not shared:
        raise CoverageError("no (task, system) overlap between scores and ratings")

    per_system: dict[str, list[tuple[float, float]]] = {}
    for key in shared:
        per_system.setdefault(key[1], []).append((auto_scores[key], human[key]))
    if len(per_system) < 2:
        raise CoverageError("system-level correlation needs at least 2 systems")

    rows = {}
    for system, pairs in per_system.items():
        rows[system] = {
            "auto": sum(p[0] for p in pairs) / len(pairs),
            "human": sum(p[1] for p in pairs) / len(pairs),
            "n_samples": len(pairs),
        }
    systems = sorted(rows)
    auto_means = [rows[s]["auto"] for s in systems]
    human_means = [rows[s]["human"] for s in systems]
    return SystemScoreTable(
        rows=rows,
        pearson=pearson(auto_means, human_means),
        kendall=kendall(auto_means, human_means),
        spearman=spearman(auto_means, human_means),
    )


def sample_level(
    auto_scores: dict[tuple[str, str], float], ratings: list[HumanRating]
) -> dict[str, float]:
    """Correlations over the pooled per-sample (auto, human) pairs."""
    human = average_human_scores(ratings)
    shared = sorted(set(auto_scores) & set(human))
    if not shared:
        raise CoverageError("no (task, system) overlap between scores and ratings")
    auto = [auto_scores[key] for key in shared]
    hum = [human[key] for key in shared]
    return {
        "pearson": pearson(auto, hum),
        "kendall": kendall(auto, hum),
        "spearman": spearman(auto, hum),
        "n_samples": len(shared),
    }


def inter_annotator_agreement(ratings: list[HumanRating]) -> dict[str, float]:
    """Kappa and Pearson between the two annotators of each double-rated
    sample; samples without exactly two annotators are skipped."""
    by_sample: dict[tuple[str, str], list[HumanRating]] = {}
    for rating in ratings:
        by_sample.setdefault((rating.task_id, rating.system_id), []).append(rating)
    first: list[int] = []
    second: list[int] = []
    for _, pair in sorted(by_sample.items()):
        if len(pair) != 2:
            continue
        pair = sorted(pair, key=lambda r: r.annotator_id)
        first.append(pair[0].score)
        second.append(pair[1].score)
    if not first:
        raise CoverageError("no double-annotated samples")
    return {
        "cohen_kappa": cohen_kappa(first, second),
        "pearson": pearson(first, second),
        "n_pairs": len(first),
    }


@dataclass
class BiasTrace:
    """Subscore ratios l = s_k / S per (sample, dimension) across N trials."""

    n_trials: int
    ratios: dict[tuple[str, str], list[float]] = field(default_factory=dict)

    def add(self, sample_id: str, dimension: str, trial_ratios: list[float]) -> None:
        if len(trial_ratios) != self.n_trials:
            raise CoverageError(
                f"{sample_id}/{dimension}: expected {self.n_trials} trials, "
                f"got {len(trial_ratios)}"
            )
        self.ratios[(sample_id, dimension)] = [float(r) for r in trial_ratios]


def negotiation_bias(trace: BiasTrace, n_trials: int | None = None) -> tuple[float, float]:
    """Mean drift and mean spread of the ratio series.

    Per (sample, dimension): drift is the summed absolute deviation of
    trials 2..N from trial 1; spread is the square root of the raw (not
    mean) squared deviation from the trial mean.  Both are then averaged
    over all (sample, dimension) pairs.
    """
    n = n_trials if n_trials is not None else trace.n_trials
    if n < 2:
        raise DegenerateInputError("bias metrics need at least 2 trials")
    if not trace.ratios:
        raise CoverageError("empty bias trace")
    deltas = []
    sigmas = []
    for key, series in trace.ratios.items():
        if len(series) != n:
            raise CoverageError(f"{key}: expected {n} trials, got {len(series)}")
        anchor = series[0]
        deltas.append(sum(abs(value - anchor) for value in series[1:]))
        mu = sum(series) / n
        sigmas.append(math.sqrt(sum((value - mu) ** 2 for value in series)))
    return sum(deltas) / len(deltas), sum(sigmas) / len(sigmas)


def bias_trace_from_subscores(
    per_sample_trials: dict[str, list[dict[str, float]]],
) -> tuple[BiasTrace, dict]:
    """Build a trace from per-trial subscore maps (auto-plan transcripts).

    For each sample, a dimension enters the trace only if every trial
    reported it with a positive total; samples contributing no dimension
    are excluded and counted in the coverage report.
    """
    n_values = {len(trials) for trials in per_sample_trials.values()}
    if len(n_values) != 1:
        raise CoverageError(f"inconsistent trial counts: {sorted(n_values)}")
    n = n_values.pop()
    trace = BiasTrace(n_trials=n)
    excluded = []
    for sample_id, trials in sorted(per_sample_trials.items()):
        totals = [sum(sub.values()) for sub in trials]
        if any(total <= 0 for total in totals) or any(not sub for sub in trials):
            excluded.append(sample_id)
            continue
        common = set(trials[0])
        for sub in trials[1:]:
            common &= set(sub)
        if not common:
            excluded.append(sample_id)
            continue
        for dimension in sorted(common):
            trace.add(
                sample_id,
                dimension,
                [sub[dimension] / total for sub, total in zip(trials, totals)],
            )
    coverage = {
        "samples": len(per_sample_trials),
        "included": len(per_sample_trials) - len(excluded),
        "excluded": excluded,
    }
    return trace, coverage


def bias_trace_from_weights(
    per_sample_trials: dict[str, list[list[float]]], dimension_names: list[str]
) -> BiasTrace:
    """Trace over explicitly negotiated weight vectors (one per trial)."""
    n_values = {len(trials) for trials in per_sample_trials.values()}
    if len(n_values) != 1:
        raise CoverageError(f"inconsistent trial counts: {sorted(n_values)}")
    n = n_values.pop()
    trace = BiasTrace(n_trials=n)
    for sample_id, trials in sorted(per_sample_trials.items()):
        for index, name in enumerate(dimension_names):
            trace.add(sample_id, name, [vector[index] for vector in trials])
    return trace
