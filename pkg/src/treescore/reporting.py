"""Report rendering: aligned text tables and their JSON twins.

Scores are carried at full precision everywhere and rounded to two
decimals only here, at the rendering boundary.
"""

from __future__ import annotations

from .data import TaskType, WritingTask
from .tree import Family, ScoreCard


def _fmt(value, width=8) -> str:
    if value is None:
        return f"{'-':>{width}}"
    return f"{value:>{width}.2f}"


def _table(header: list[str], rows: list[list], first_width=16) -> str:
    lines = [
        f"{header[0]:<{first_width}}" + "".join(f"{h:>10}" for h in header[1:])
    ]
    for row in rows:
        cells = [f"{str(row[0]):<{first_width}}"]
        for value in row[1:]:
            if isinstance(value, str):
                cells.append(f"{value:>10}")
            elif value is None:
                cells.append(f"{'-':>10}")
            else:
                cells.append(f"{value:>10.2f}")
        lines.append("".join(cells))
    return "\n".join(lines)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def summary_tables(
    cards: list[ScoreCard], tasks: list[WritingTask]
) -> tuple[dict, str]:
    """Per-system means overall, by task type and by genre."""
    task_by_id = {task.id: task for task in tasks}
    systems = sorted({card.system_id for card in cards})

    def rows_for(group_of):
        grouped: dict[str, dict[str, list[float]]] = {}
        for card in cards:
            task = task_by_id.get(card.task_id)
            if task is None:
                continue
            group = group_of(task)
            grouped.setdefault(group, {}).setdefault(card.system_id, []).append(
                card.root_score
            )
        return grouped

    by_type = rows_for(lambda task: task.task_type.value)
    by_genre = rows_for(lambda task: task.genre)

    payload = {"systems": {}, "by_task_type": {}, "by_genre": {}, "n_samples": len(cards)}
    for system in systems:
        scores = [c.root_score for c in cards if c.system_id == system]
        payload["systems"][system] = _mean(scores)
    for group, per_system in sorted(by_type.items()):
        payload["by_task_type"][group] = {
            system: _mean(per_system.get(system, [])) for system in systems
        }
    for group, per_system in sorted(by_genre.items()):
        payload["by_genre"][group] = {
            system: _mean(per_system.get(system, [])) for system in systems
        }

    header = ["group"] + systems + ["AVG"]
    rows = []
    for group in [t.value for t in TaskType if t.value in by_type]:
        per_system = by_type[group]
        values = [_mean(per_system.get(s, [])) for s in systems]
        pooled = [v for vals in per_system.values() for v in vals]
        rows.append([group] + values + [_mean(pooled)])
    for group in sorted(by_genre):
        per_system = by_genre[group]
        values = [_mean(per_system.get(s, [])) for s in systems]
        pooled = [v for vals in per_system.values() for v in vals]
        rows.append([group] + values + [_mean(pooled)])
    all_values = [payload["systems"][s] for s in systems]
    rows.append(["ALL"] + all_values + [_mean([c.root_score for c in cards])])
    return payload, _table(header, rows)


def stats_table(stats_dict: dict) -> str:
    header = ["group", "count", "instr", "info", "ref"]
    rows = []
    for group, values in sorted(stats_dict.items()):
        rows.append(
            [
                group,
                float(values["count"]),
                values["mean_instruction_len"],
                values["mean_grounding_len"],
                values["mean_reference_len"],
            ]
        )
    return _table(header, rows, first_width=24)


def correlation_table(payload: dict) -> str:
    columns = ["completion", "guide", "open", "all"]
    header = ["level"] + [c for c in columns if c in payload.get("system_level", {})]
    lines = []
    system = payload.get("system_level", {})
    for stat in ("pearson", "kendall", "spearman"):
        row = [f"system {stat}"]
        for column in header[1:]:
            cell = system.get(column)
            row.append(cell.get(stat) if cell else None)
        lines.append(row)
    sample = payload.get("sample_level", {})
    for stat in ("pearson", "kendall", "spearman"):
        if not sample:
            break
        row = [f"sample {stat}"]
        for column in header[1:]:
            cell = sample.get(column)
            row.append(cell.get(stat) if cell else None)
        lines.append(row)
    return _table(header, lines, first_width=18)


def quantile(sorted_values: list[float], q: float) -> float:
    """Linear-interpolation quantile over an already sorted list."""
    if not sorted_values:
        raise ValueError("no values")
    if len(sorted_values) == 1:
        return sorted_values[0]
    position = q * (len(sorted_values) - 1)
    low = int(position)
    high = min(low + 1, len(sorted_values) - 1)
    fraction = position - low
    return sorted_values[low] * (1 - fraction) + sorted_values[high] * fraction


def weight_summary(values: list[float]) -> dict:
    ordered = sorted(values)
    return {
        "min": ordered[0],
        "q1": quantile(ordered, 0.25),
        "median": quantile(ordered, 0.5),
        "q3": quantile(ordered, 0.75),
        "max": ordered[-1],
        "n": len(ordered),
    }


def weights_table(payload: dict) -> str:
    header = ["genre/leaf", "min", "q1", "median", "q3", "max"]
    rows = []
    for genre, leaves in sorted(payload.items()):
        for leaf, summary in sorted(leaves.items()):
            rows.append(
                [
                    f"{genre}/{leaf}",
                    summary["min"],
                    summary["q1"],
                    summary["median"],
                    summary["q3"],
                    summary["max"],
                ]
            )
    return _table(header, rows, first_width=32)


def robustness_table(report_dict: dict) -> str:
    labels = sorted(
        {label for cells in report_dict["deltas"].values() for label in cells}
    )
    header = ["metric", "initial"] + labels
    rows = []
    for metric in sorted(report_dict["deltas"]):
        row = [metric, report_dict["initial_means"][metric]]
        for label in labels:
            cell = report_dict["deltas"][metric][label]
            text = f"{cell['delta']:+.2f}"
            if cell["undesired"]:
                text += "!"
            row.append(text)
        rows.append(row)
    return _table(header, rows, first_width=16)


def lengths_table(rows: list[dict]) -> str:
    header = ["pair", "completion", "guide", "open"]
    by_pair: dict[str, dict[str, str]] = {}
    for row in rows:
        stars = "**" if row["p"] < 0.05 else ("*" if row["p"] < 0.1 else "")
        by_pair.setdefault(row["pair"], {})[row["task_type"]] = (
            f"{row['r']:.2f}{stars}"
        )
    table_rows = []
    for pair, cells in by_pair.items():
        table_rows.append(
            [pair] + [cells.get(c, "-") for c in ("completion", "guide", "open")]
        )
    return _table(header, table_rows, first_width=22)
