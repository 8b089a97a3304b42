"""Run configuration: one declarative JSON file drives every subcommand.

Secrets never live in the file; live backends read their API key from the
environment variable named by `api_key_env`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import TaskType
from .errors import ConfigError
from .judge import PriceTable
from .tree import AblationMode, Family

JUDGE_ROLES = ("negotiator", "content", "format", "impression", "baseline", "transfer")

# Roles that must be configured before a command can run.
ROLES_FOR_EVALUATE = ("negotiator", "content", "format", "impression")


@dataclass(frozen=True)
class JudgeSpec:
    model_id: str
    temperature: float = 0.0
    sc_temperature: float = 0.7
    endpoint: str | None = None
    api_key_env: str = "TREESCORE_API_KEY"
    prices: PriceTable = field(default_factory=PriceTable)
    max_tokens: int | None = None

    @classmethod
    def from_dict(cls, record: dict) -> "JudgeSpec":
        if "model_id" not in record:
            raise ConfigError("judge spec needs a model_id")
        prices = record.get("prices", {})
        return cls(
            model_id=record["model_id"],
            temperature=float(record.get("temperature", 0.0)),
            sc_temperature=float(record.get("sc_temperature", 0.7)),
            endpoint=record.get("endpoint"),
            api_key_env=record.get("api_key_env", "TREESCORE_API_KEY"),
            prices=PriceTable(
                prompt_per_million=float(prices.get("prompt_per_million", 0.0)),
                completion_per_million=float(prices.get("completion_per_million", 0.0)),
            ),
            max_tokens=record.get("max_tokens"),
        )


def _parse_masks(record: dict) -> dict[TaskType, frozenset[Family]]:
    masks = {}
    for key, families in record.items():
        masks[TaskType.parse(key)] = frozenset(Family(f) for f in families)
    return masks


@dataclass(frozen=True)
class RunConfig:
    tasks: Path
    out_dir: Path
    generations: Path | None = None
    ratings: Path | None = None
    ablation: AblationMode = AblationMode.FULL
    root_strategy: str = "leaf_count"
    family_masks: dict[TaskType, frozenset[Family]] | None = None
    judges: dict[str, JudgeSpec] = field(default_factory=dict)
    trials: dict[str, int] = field(default_factory=dict)
    self_consistency: int = 1
    negotiator_retries: int = 2
    seeds: tuple[int, ...] = (0,)
    cache_mode: str = "live"
    cache_path: Path | None = None
    prompt_language: str = "en"
    prompt_dir: Path | None = None
    reference_free: bool = False
    concurrency: int = 1
    perturbation_kinds: tuple[str, ...] = ("drop", "repeat")
    transfer_targets: tuple[str, ...] = ()
    force: bool = False

    @classmethod
    def from_dict(cls, record: dict, base_dir: Path | None = None) -> "RunConfig":
        base = Path(base_dir) if base_dir else Path(".")

        def path_of(key, required=False):
            value = record.get(key)
            if value is None:
                if required:
                    raise ConfigError(f"config is missing required path {key!r}")
                return None
            p = Path(value)
            return p if p.is_absolute() else base / p

        judges = {
            role: JudgeSpec.from_dict(spec)
            for role, spec in record.get("judges", {}).items()
        }
        for role in judges:
            if role not in JUDGE_ROLES:
                raise ConfigError(f"unknown judge role {role!r}")

        tree = record.get("tree", {})
        cache = record.get("cache", {})
        prompts = record.get("prompts", {})
        perturb = record.get("perturbations", {})
        try:
            ablation = AblationMode(tree.get("ablation", "Full"))
        except ValueError:
            raise ConfigError(f"unknown ablation mode {tree.get('ablation')!r}") from None

        config = cls(
            tasks=path_of("tasks", required=True),
            out_dir=path_of("out_dir", required=True),
            generations=path_of("generations"),
            ratings=path_of("ratings"),
            ablation=ablation,
            root_strategy=tree.get("root_strategy", "leaf_count"),
            family_masks=(
                _parse_masks(tree["family_masks"]) if "family_masks" in tree else None
            ),
            judges=judges,
            trials={k: int(v) for k, v in record.get("trials", {}).items()},
            self_consistency=int(record.get("self_consistency", 1)),
            negotiator_retries=int(record.get("negotiator_retries", 2)),
            seeds=tuple(int(s) for s in record.get("seeds", [0])),
            cache_mode=cache.get("mode", "live"),
            cache_path=(
                (Path(cache["path"]) if Path(cache["path"]).is_absolute()
                 else base / cache["path"])
                if cache.get("path")
                else None
            ),
            prompt_language=prompts.get("language", "en"),
            prompt_dir=(Path(prompts["dir"]) if prompts.get("dir") else None),
            reference_free=bool(prompts.get("reference_free", False)),
            concurrency=int(record.get("concurrency", 1)),
            perturbation_kinds=tuple(perturb.get("kinds", ["drop", "repeat"])),
            transfer_targets=tuple(perturb.get("transfer_targets", [])),
        )
        config.validate()
        return config

    def validate(self) -> None:
        if self.root_strategy not in ("leaf_count", "family_mean"):
            raise ConfigError(f"unknown root strategy {self.root_strategy!r}")
        if self.cache_mode not in ("live", "replay", "record"):
            raise ConfigError(f"unknown cache mode {self.cache_mode!r}")
        if self.cache_mode in ("replay", "record") and self.cache_path is None:
            raise ConfigError(f"{self.cache_mode} mode requires cache.path")
        if self.cache_mode == "replay":
            for role, spec in self.judges.items():
                if spec.endpoint:
                    raise ConfigError(
                        f"replay mode forbids live endpoints (role {role!r})"
                    )
        if self.self_consistency < 1:
            raise ConfigError("self_consistency must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        for kind in self.perturbation_kinds:
            if kind not in ("drop", "repeat", "transfer"):
                raise ConfigError(f"unknown perturbation kind {kind!r}")
        if "transfer" in self.perturbation_kinds and not self.transfer_targets:
            raise ConfigError("transfer perturbation needs transfer_targets")
        if self.perturbation_kinds and not self.seeds:
            raise ConfigError("perturbations need at least one seed")

    def require_roles(self, roles) -> None:
        missing = [role for role in roles if role not in self.judges]
        if missing:
            raise ConfigError(
                f"config is missing judge backends for: {', '.join(missing)}"
            )


def load_config(
    path: str | Path,
    *,
    out_dir: str | None = None,
    cache_mode: str | None = None,
    seed: int | None = None,
    concurrency: int | None = None,
    force: bool = False,
) -> RunConfig:
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if out_dir is not None:
        record["out_dir"] = str(Path(out_dir).resolve())
    if cache_mode is not None:
        record.setdefault("cache", {})["mode"] = cache_mode
    if seed is not None:
        record["seeds"] = [seed]
    if concurrency is not None:
        record["concurrency"] = concurrency
    config = RunConfig.from_dict(record, base_dir=path.parent)
    if force:
        from dataclasses import replace

        config = replace(config, force=True)
    return config
