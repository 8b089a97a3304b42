"""Batch workflows behind the CLI subcommands.

A Runtime wires the shared response cache, cost ledger and one judge
client per role out of a RunConfig; the run_* functions load inputs, fan
out over samples and write line-delimited outputs plus rendered tables.
Per-sample scorer failures are soft: they are collected into a failure
report and never abort the batch.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import reporting
from .config import ROLES_FOR_EVALUATE, RunConfig
from .data import (
    GenerationRecord,
    WritingTask,
    char_length,
    compute_stats,
    dump_jsonl,
    load_generations,
    load_ratings,
    load_tasks,
)
from .errors import ConfigError, DegenerateInputError, TreescoreError
from .experts import make_scorer_registry
from .judge import CostLedger, HttpBackend, JudgeClient, ResponseCache, report_cost
from .metaeval import (
    inter_annotator_agreement,
    pearson_with_p,
    sample_level,
    system_level,
)
from .negotiator import negotiate
from .perturb import (
    PerturbationKind,
    drop,
    repeat,
    robustness_report,
    transfer,
)
from .prompts import DIMENSION_LABELS, PromptLibrary
from .tree import (
    AblationMode,
    EvalTree,
    Family,
    ScoreCard,
    ablate,
    evaluate_sample,
    load_scorecards,
)


class Runtime:
    """Shared judge clients, cache and ledger for one run.

    `scripted_backends` maps judge roles to stub backends; it is how tests
    and the fixture recorder drive the full pipeline without a network.
    """

    def __init__(self, config: RunConfig, scripted_backends: dict | None = None):
        self.config = config
        self.cache = (
            ResponseCache(config.cache_path)
            if config.cache_mode in ("replay", "record")
            else None
        )
        self.ledger = CostLedger(
            {spec.model_id: spec.prices for spec in config.judges.values()}
        )
        self.prompts = PromptLibrary(
            language=config.prompt_language,
            root=config.prompt_dir,
            reference_free=config.reference_free,
        )
        scripted_backends = scripted_backends or {}
        self.clients: dict[str, JudgeClient] = {}
        for role, spec in config.judges.items():
            backend = scripted_backends.get(role)
            if backend is None and config.cache_mode != "replay":
                if spec.endpoint is None:
                    raise ConfigError(
                        f"role {role!r} has no endpoint and no scripted backend "
                        f"in {config.cache_mode} mode"
                    )
                backend = HttpBackend(spec.endpoint, spec.api_key_env)
            self.clients[role] = JudgeClient(
                backend=backend,
                cache=self.cache,
                mode=config.cache_mode,
                ledger=self.ledger,
                max_in_flight=config.concurrency,
            )

    def client(self, role: str) -> JudgeClient:
        try:
            return self.clients[role]
        except KeyError:
            raise ConfigError(f"no judge configured for role {role!r}") from None


@dataclass
class EvaluateOutcome:
    cards: list[ScoreCard]
    failures: list[dict] = field(default_factory=list)
    out_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return True  # soft failures do not fail the run


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")


def evaluate_generations(
    config: RunConfig,
    runtime: Runtime,
    tasks: list[WritingTask],
    generations: list[GenerationRecord],
    existing: dict[tuple[str, str], ScoreCard] | None = None,
) -> EvaluateOutcome:
    """Negotiate, score and aggregate every (task, system) sample."""
    config.require_roles(ROLES_FOR_EVALUATE)
    tree = ablate(EvalTree(), config.ablation)
    task_by_id = {task.id: task for task in tasks}
    masks = config.family_masks

    registry = make_scorer_registry(
        {
            "content": (runtime.client("content"), config.judges["content"].model_id),
            "format": (runtime.client("format"), config.judges["format"].model_id),
            "impression": (
                runtime.client("impression"),
                config.judges["impression"].model_id,
            ),
        },
        trials={role: config.trials.get(role, 1) for role in ("content", "format", "impression")},
        temperature={
            role: config.judges[role].temperature
            for role in ("content", "format", "impression")
        },
        prompts=runtime.prompts,
    )

    negotiator_spec = config.judges["negotiator"]
    plans: dict[str, object] = {}
    plan_failures: dict[str, str] = {}
    needed = sorted({g.task_id for g in generations if g.task_id in task_by_id})
    for task_id in needed:
        task = task_by_id[task_id]
        effective = tree.for_task_type(task.task_type, masks)
        families = tuple(
            family
            for family in (Family.CONTENT, Family.FORMAT)
            if family in effective.enabled_families
        )
        if not families:
            plans[task_id] = None
            continue
        try:
            plans[task_id] = negotiate(
                task,
                runtime.client("negotiator"),
                config.negotiator_retries,
                model_id=negotiator_spec.model_id,
                families=families,
                temperature=negotiator_spec.temperature,
                prompts=runtime.prompts,
            )
        except TreescoreError as exc:
            plan_failures[task_id] = str(exc)

    existing = existing or {}
    failures: list[dict] = []
    results: dict[tuple[str, str], ScoreCard] = dict(existing)

    def score_one(generation: GenerationRecord):
        key = (generation.task_id, generation.system_id)
        task = task_by_id.get(generation.task_id)
        if task is None:
            return key, None, "unknown task id"
        if generation.task_id in plan_failures:
            return key, None, f"negotiation failed: {plan_failures[generation.task_id]}"
        try:
            card = evaluate_sample(
                task,
                generation,
                tree,
                plans[generation.task_id],
                registry,
                masks=masks,
                root_strategy=config.root_strategy,
            )
            return key, card, None
        except TreescoreError as exc:
            return key, None, str(exc)

    todo = [g for g in generations if (g.task_id, g.system_id) not in results]
    if config.concurrency > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            outcomes = list(pool.map(score_one, todo))
    else:
        outcomes = [score_one(generation) for generation in todo]

    for key, card, error in outcomes:
        if card is not None:
            results[key] = card
        else:
            failures.append(
                {"task_id": key[0], "system_id": key[1], "error": error}
            )

    ordered = [
        results[(g.task_id, g.system_id)]
        for g in generations
        if (g.task_id, g.system_id) in results
    ]
    return EvaluateOutcome(cards=ordered, failures=failures)


def run_evaluate(config: RunConfig, runtime: Runtime | None = None) -> EvaluateOutcome:
    runtime = runtime or Runtime(config)
    tasks = load_tasks(config.tasks)
    if config.generations is None:
        raise ConfigError("evaluate needs a generations file")
    generations = load_generations(config.generations, {t.id for t in tasks})
    if not generations:
        raise ConfigError("generations file is empty")

    out_dir = Path(config.out_dir)
    cards_path = out_dir / "scorecards.jsonl"
    existing: dict[tuple[str, str], ScoreCard] = {}
    if cards_path.exists() and not config.force:
        existing = {
            (card.task_id, card.system_id): card
            for card in load_scorecards(cards_path)
        }

    outcome = evaluate_generations(config, runtime, tasks, generations, existing)
    outcome.out_dir = out_dir

    out_dir.mkdir(parents=True, exist_ok=True)
    with cards_path.open("w", encoding="utf-8") as handle:
        for card in outcome.cards:
            handle.write(card.to_json_line())
            handle.write("\n")

    summary_json, summary_text = reporting.summary_tables(outcome.cards, tasks)
    _write_json(out_dir / "summary.json", summary_json)
    _write_text(out_dir / "summary.txt", summary_text)
    _write_json(out_dir / "cost.json", runtime.ledger.to_dict())
    _write_text(out_dir / "cost.txt", report_cost(runtime.ledger))
    if outcome.failures:
        dump_jsonl(outcome.failures, out_dir / "failures.jsonl")
    return outcome


def _auto_scores(cards: list[ScoreCard]) -> dict[tuple[str, str], float]:
    return {(card.task_id, card.system_id): card.root_score for card in cards}


def run_meta_eval(config: RunConfig, cards: list[ScoreCard] | None = None) -> dict:
    if config.ratings is None:
        raise ConfigError("meta-eval needs a ratings file")
    tasks = load_tasks(config.tasks)
    if cards is None:
        cards_path = Path(config.out_dir) / "scorecards.jsonl"
        if not cards_path.exists():
            raise ConfigError(f"no scorecards at {cards_path}; run evaluate first")
        cards = load_scorecards(cards_path)
    ratings = load_ratings(config.ratings)

    task_type = {task.id: task.task_type.value for task in tasks}
    payload: dict = {"system_level": {}, "sample_level": {}}
    subsets = {"all": cards}
    for card in cards:
        subsets.setdefault(task_type.get(card.task_id, "unknown"), []).append(card)

    for name, subset in sorted(subsets.items()):
        if not subset:
            continue
        scores = _auto_scores(subset)
        try:
            table = system_level(scores, ratings)
            payload["system_level"][name] = {
                "pearson": table.pearson,
                "kendall": table.kendall,
                "spearman": table.spearman,
                "systems": table.rows,
            }
        except (TreescoreError, DegenerateInputError) as exc:
            payload["system_level"][name] = {"error": str(exc)}
        try:
            payload["sample_level"][name] = sample_level(scores, ratings)
        except (TreescoreError, DegenerateInputError) as exc:
            payload["sample_level"][name] = {"error": str(exc)}

    try:
        payload["inter_annotator"] = inter_annotator_agreement(ratings)
    except (TreescoreError, DegenerateInputError) as exc:
        payload["inter_annotator"] = {"error": str(exc)}

    out_dir = Path(config.out_dir)
    _write_json(out_dir / "correlations.json", payload)
    _write_text(out_dir / "correlations.txt", reporting.correlation_table(payload))
    return payload


def run_stats(config: RunConfig) -> dict:
    tasks = load_tasks(config.tasks)
    stats = compute_stats(tasks).to_dict()
    payload = {"groups": stats}

    cards_path = Path(config.out_dir) / "scorecards.jsonl"
    if config.generations is not None and cards_path.exists():
        payload["length_correlations"] = length_correlations(
            tasks,
            load_generations(config.generations),
            load_scorecards(cards_path),
        )

    out_dir = Path(config.out_dir)
    _write_json(out_dir / "stats.json", payload)
    text = reporting.stats_table(stats)
    if "length_correlations" in payload:
        text += "\n\n" + reporting.lengths_table(payload["length_correlations"])
    _write_text(out_dir / "stats.txt", text)
    return payload


def length_correlations(
    tasks: list[WritingTask],
    generations: list[GenerationRecord],
    cards: list[ScoreCard],
) -> list[dict]:
    """Input-length/output-length/score correlations per task type."""
    task_by_id = {task.id: task for task in tasks}
    gen_by_key = {(g.task_id, g.system_id): g for g in generations}
    rows = []
    samples: dict[str, list[dict]] = {}
    for card in cards:
        task = task_by_id.get(card.task_id)
        generation = gen_by_key.get((card.task_id, card.system_id))
        if task is None or generation is None:
            continue
        samples.setdefault(task.task_type.value, []).append(
            {
                "input": char_length(task.instruction)
                + (char_length(task.grounding) if task.grounding else 0),
                "output": char_length(generation.text),
                "overall": card.root_score,
                "content": card.primary_scores.get(Family.CONTENT),
                "format": card.primary_scores.get(Family.FORMAT),
            }
        )
    pairs = [
        ("input", "output"),
        ("input", "overall"),
        ("input", "content"),
        ("input", "format"),
        ("output", "overall"),
        ("output", "content"),
        ("output", "format"),
    ]
    for task_type, rows_of_type in sorted(samples.items()):
        for x_name, y_name in pairs:
            points = [
                (row[x_name], row[y_name])
                for row in rows_of_type
                if row[x_name] is not None and row[y_name] is not None
            ]
            if len(points) < 3:
                continue
            try:
                r, p = pearson_with_p(
                    [pt[0] for pt in points], [pt[1] for pt in points]
                )
            except DegenerateInputError:
                continue
            rows.append(
                {
                    "task_type": task_type,
                    "pair": f"{x_name}-{y_name}",
                    "r": r,
                    "p": p,
                    "n": len(points),
                }
            )
    return rows


def run_baseline(config: RunConfig) -> list[dict]:
    from .baselines import bleu1, rouge_l

    tasks = load_tasks(config.tasks)
    if config.generations is None:
        raise ConfigError("baseline needs a generations file")
    generations = load_generations(config.generations, {t.id for t in tasks})
    task_by_id = {task.id: task for task in tasks}

    rows = []
    for generation in generations:
        reference = task_by_id[generation.task_id].reference
        rows.append(
            {
                "task_id": generation.task_id,
                "system_id": generation.system_id,
                "bleu1": bleu1(generation.text, reference).value,
                "rouge_l": rouge_l(generation.text, reference).value,
            }
        )

    per_system: dict[str, dict[str, list[float]]] = {}
    for row in rows:
        bucket = per_system.setdefault(row["system_id"], {"bleu1": [], "rouge_l": []})
        bucket["bleu1"].append(row["bleu1"])
        bucket["rouge_l"].append(row["rouge_l"])
    means = {
        system: {metric: sum(vals) / len(vals) for metric, vals in buckets.items()}
        for system, buckets in sorted(per_system.items())
    }

    out_dir = Path(config.out_dir)
    dump_jsonl(rows, out_dir / "baseline_scores.jsonl")
    _write_json(out_dir / "baseline_means.json", means)
    return rows


def perturb_generations(
    config: RunConfig,
    generations: list[GenerationRecord],
    kind: PerturbationKind,
    seed: int,
    target_genre: str | None = None,
    runtime: Runtime | None = None,
) -> list[GenerationRecord]:
    perturbed = []
    for index, generation in enumerate(generations):
        if kind is PerturbationKind.DROP:
            text = drop(generation.text, seed + index)
        elif kind is PerturbationKind.REPEAT:
            text = repeat(generation.text, seed + index)
        else:
            if runtime is None:
                raise ConfigError("transfer perturbation needs a judge runtime")
            spec = config.judges["transfer"]
            text = transfer(
                generation.text,
                target_genre,
                runtime.client("transfer"),
                model_id=spec.model_id,
                temperature=spec.temperature,
                prompts=runtime.prompts,
            )
        perturbed.append(
            GenerationRecord(
                task_id=generation.task_id,
                system_id=generation.system_id,
                text=text,
            )
        )
    return perturbed


def _metric_rows(cards: list[ScoreCard]) -> dict[tuple[str, str], dict[str, float]]:
    rows = {}
    for card in cards:
        row = {"root": card.root_score}
        for family, score in card.primary_scores.items():
            row[family.value] = score
        rows[(card.task_id, card.system_id)] = row
    return rows


def run_robustness(config: RunConfig, runtime: Runtime | None = None) -> dict:
    runtime = runtime or Runtime(config)
    tasks = load_tasks(config.tasks)
    if config.generations is None:
        raise ConfigError("robustness needs a generations file")
    generations = load_generations(config.generations, {t.id for t in tasks})

    initial = evaluate_generations(config, runtime, tasks, generations)
    if initial.failures:
        raise TreescoreError(
            f"initial evaluation had {len(initial.failures)} failures; "
            "robustness needs full coverage"
        )

    variants: list[tuple[str, PerturbationKind, str | None]] = []
    for kind in config.perturbation_kinds:
        if kind == "transfer":
            config.require_roles(("transfer",))
            for target in config.transfer_targets:
                variants.append((f"transfer:{target}", PerturbationKind.TRANSFER, target))
        else:
            variants.append((kind, PerturbationKind(kind), None))

    out_dir = Path(config.out_dir)
    perturbed_scores: dict[str, dict] = {}
    for label, kind, target in variants:
        per_seed_rows = []
        for seed in config.seeds:
            perturbed = perturb_generations(
                config, generations, kind, seed, target, runtime
            )
            safe_label = label.replace(":", "_")
            dump_jsonl(
                perturbed, out_dir / "perturbed" / f"{safe_label}_seed{seed}.jsonl"
            )
            outcome = evaluate_generations(config, runtime, tasks, perturbed)
            if outcome.failures:
                raise TreescoreError(
                    f"{label} seed {seed}: {len(outcome.failures)} scoring failures"
                )
            per_seed_rows.append(_metric_rows(outcome.cards))
        merged: dict[tuple[str, str], dict[str, float]] = {}
        for key in per_seed_rows[0]:
            metrics = per_seed_rows[0][key].keys()
            merged[key] = {
                metric: sum(rows[key][metric] for rows in per_seed_rows)
                / len(per_seed_rows)
                for metric in metrics
            }
        perturbed_scores[label] = merged

    report = robustness_report(_metric_rows(initial.cards), perturbed_scores)
    payload = report.to_dict()
    _write_json(out_dir / "robustness.json", payload)
    _write_text(out_dir / "robustness.txt", reporting.robustness_table(payload))
    return payload


def run_weights(config: RunConfig, cards: list[ScoreCard] | None = None) -> dict:
    tasks = load_tasks(config.tasks)
    if cards is None:
        cards_path = Path(config.out_dir) / "scorecards.jsonl"
        if not cards_path.exists():
            raise ConfigError(f"no scorecards at {cards_path}; run evaluate first")
        cards = load_scorecards(cards_path)
    genre_of = {task.id: task.genre for task in tasks}

    collected: dict[str, dict[str, list[float]]] = {}
    for card in cards:
        genre = genre_of.get(card.task_id, "unknown")
        for family, vector in (
            (Family.CONTENT, card.content_weights),
            (Family.FORMAT, card.format_weights),
        ):
            if vector is None:
                continue
            labels = [label for _, label in DIMENSION_LABELS[family]]
            for label, weight in zip(labels, vector):
                collected.setdefault(genre, {}).setdefault(label, []).append(weight)

    payload = {
        genre: {
            label: reporting.weight_summary(values)
            for label, values in leaves.items()
        }
        for genre, leaves in collected.items()
    }
    out_dir = Path(config.out_dir)
    _write_json(out_dir / "weights.json", payload)
    _write_text(out_dir / "weights.txt", reporting.weights_table(payload))
    return payload
