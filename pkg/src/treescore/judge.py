"""Pluggable judge gateway.

A JudgeClient wraps one backend (live HTTP endpoint, scripted stub, or
nothing at all in replay mode) with retry logic, a persistent response
cache and cost accounting.  Cache keys are (model_id, sha256(prompt),
temperature, trial_index), so self-consistency trials stay distinct and a
recorded run can be replayed bit-identically on another machine.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CacheMissError, ConfigError, JudgeError, TransientJudgeError


@dataclass(frozen=True)
class JudgeRequest:
    model_id: str
    prompt: str
    temperature: float = 0.0
    trial_index: int = 0
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.prompt:
            raise JudgeError("prompt must be non-empty")
        if self.temperature < 0:
            raise JudgeError("temperature must be >= 0")
        if self.trial_index < 0:
            raise JudgeError("trial_index must be >= 0")

    def cache_key(self) -> str:
        digest = hashlib.sha256(self.prompt.encode("utf-8")).hexdigest()
        return f"{self.model_id}:{digest}:{self.temperature:g}:{self.trial_index}"


@dataclass(frozen=True)
class JudgeResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cached: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise JudgeError("token counts must be >= 0")


@dataclass(frozen=True)
class PriceTable:
    """Dollars per one million tokens."""

    prompt_per_million: float = 0.0
    completion_per_million: float = 0.0

    def cost(self, prompt_tokens: int, completion_tokens: int) -> float:
        return (
            prompt_tokens * self.prompt_per_million
            + completion_tokens * self.completion_per_million
        ) / 1_000_000.0


class CostLedger:
    """Thread-safe accumulator of token usage and dollar spend per model.

    Token counts are summed as integers and the dollar figure is derived at
    read time, so concurrent recording order cannot perturb the totals.
    """

    def __init__(self, prices: dict[str, PriceTable] | None = None):
        self._prices = dict(prices or {})
        self._lock = threading.Lock()
        self._tokens: dict[str, list[int]] = {}

    def set_price(self, model_id: str, prices: PriceTable) -> None:
        with self._lock:
            self._prices[model_id] = prices

    def record(self, model_id: str, prompt_tokens: int, completion_tokens: int) -> None:
        with self._lock:
            row = self._tokens.setdefault(model_id, [0, 0])
            row[0] += prompt_tokens
            row[1] += completion_tokens

    def rows(self) -> dict[str, dict[str, float]]:
        with self._lock:
            return {
                model: {
                    "prompt_tokens": tokens[0],
                    "completion_tokens": tokens[1],
                    "cost": self._prices.get(model, PriceTable()).cost(*tokens),
                }
                for model, tokens in sorted(self._tokens.items())
            }

    def total_cost(self) -> float:
        return sum(row["cost"] for row in self.rows().values())

    def to_dict(self) -> dict:
        return {"models": self.rows(), "total_cost": self.total_cost()}


class ResponseCache:
    """Append-friendly JSONL store of judge responses, keyed per request."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path is not None and self.path.exists():
            with self.path.open("r", encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    self._entries[record["key"]] = record

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, request: JudgeRequest, response: JudgeResponse) -> None:
        record = {
            "key": key,
            "model_id": request.model_id,
            "temperature": request.temperature,
            "trial_index": request.trial_index,
            "text": response.text,
            "prompt_tokens": response.prompt_tokens,
            "completion_tokens": response.completion_tokens,
        }
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
                    handle.write("\n")


class ScriptedBackend:
    """Deterministic stub backend for tests and fixture recording.

    `script` is either a callable(request) -> str, or a mapping from exact
    prompt text to response text.  Token counts are deterministic character
    counts so that recorded fixtures replay identically anywhere.
    """

    def __init__(self, script):
        self._script = script

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        if callable(self._script):
            text = self._script(request)
        else:
            try:
                text = self._script[request.prompt]
            except KeyError:
                raise JudgeError(
                    f"scripted backend has no response for this prompt "
                    f"(model {request.model_id})"
                ) from None
        if text is None or text == "":
            raise JudgeError("scripted backend returned an empty response")
        return JudgeResponse(
            text=text,
            prompt_tokens=len(request.prompt),
            completion_tokens=len(text),
            cached=False,
        )


class HttpBackend:
    """OpenAI-style chat-completions endpoint; API key comes from the
    environment, never from configuration files."""

    def __init__(self, endpoint: str, api_key_env: str, timeout: float = 120.0):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        import requests

        api_key = os.environ.get(self.api_key_env, "")
        if not api_key:
            raise ConfigError(
                f"environment variable {self.api_key_env} is not set"
            )
        payload = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        try:
            resp = requests.post(
                self.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientJudgeError(str(exc)) from exc
        if resp.status_code in (408, 429, 500, 502, 503, 504):
            raise TransientJudgeError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise JudgeError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        body = resp.json()
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise JudgeError("malformed completion payload") from None
        usage = body.get("usage", {})
        if not text:
            raise JudgeError("endpoint returned an empty response")
        return JudgeResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )


LIVE = "live"
REPLAY = "replay"
RECORD = "record"


class JudgeClient:
    """Completion gateway with retries, caching and cost accounting."""

    def __init__(
        self,
        backend=None,
        *,
        cache: ResponseCache | None = None,
        mode: str = LIVE,
        ledger: CostLedger | None = None,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        max_in_flight: int | None = None,
        sleep=time.sleep,
    ):
        if mode not in (LIVE, REPLAY, RECORD):
            raise ConfigError(f"unknown cache mode {mode!r}")
        if mode in (LIVE, RECORD) and backend is None:
            raise ConfigError(f"{mode} mode requires a backend")
        if mode in (REPLAY, RECORD) and cache is None:
            raise ConfigError(f"{mode} mode requires a cache")
        self.backend = backend
        self.cache = cache
        self.mode = mode
        self.ledger = ledger if ledger is not None else CostLedger()
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._gate = (
            threading.BoundedSemaphore(max_in_flight) if max_in_flight else None
        )

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        key = request.cache_key()
        if self.cache is not None and self.mode in (REPLAY, RECORD):
            hit = self.cache.get(key)
            if hit is not None:
                response = JudgeResponse(
                    text=hit["text"],
                    prompt_tokens=hit["prompt_tokens"],
                    completion_tokens=hit["completion_tokens"],
                    cached=True,
                )
                self.ledger.record(
                    request.model_id, response.prompt_tokens, response.completion_tokens
                )
                return response
            if self.mode == REPLAY:
                raise CacheMissError(f"replay cache has no entry for {key}")

        response = self._complete_live(request)
        if self.mode == RECORD:
            self.cache.put(key, request, response)
        self.ledger.record(
            request.model_id, response.prompt_tokens, response.completion_tokens
        )
        return response

    def _complete_live(self, request: JudgeRequest) -> JudgeResponse:
        attempt = 0
        while True:
            try:
                if self._gate is not None:
                    with self._gate:
                        response = self.backend.complete(request)
                else:
                    response = self.backend.complete(request)
            except TransientJudgeError:
                attempt += 1
                if attempt > self.max_retries:
                    raise
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
                continue
            if not response.text:
                raise JudgeError("empty judge response")
            return response

    def self_consistency(self, request: JudgeRequest, n: int) -> list[JudgeResponse]:
        """Issue n completions with trial indices 0..n-1 (distinct cache keys)."""
        if n < 1:
            raise JudgeError("self-consistency requires n >= 1")
        responses = []
        for trial in range(n):
            trial_request = JudgeRequest(
                model_id=request.model_id,
                prompt=request.prompt,
                temperature=request.temperature,
                trial_index=trial,
                max_tokens=request.max_tokens,
            )
            responses.append(self.complete(trial_request))
        return responses


def report_cost(ledger: CostLedger) -> str:
    """Aligned text table: one row per model plus a total row."""
    rows = ledger.rows()
    lines = [f"{'model':<24} {'prompt_tok':>12} {'completion_tok':>15} {'cost':>12}"]
    for model, row in rows.items():
        lines.append(
            f"{model:<24} {int(row['prompt_tokens']):>12} "
            f"{int(row['completion_tokens']):>15} {'$' + format(row['cost'], '.4f'):>12}"
        )
    lines.append(
        f"{'total':<24} {'':>12} {'':>15} {'$' + format(ledger.total_cost(), '.4f'):>12}"
    )
    return "\n".join(lines)
