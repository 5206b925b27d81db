"""Clients for generation endpoints and external scorers, plus prompt construction.

Endpoint evaluation is expensive and flaky, so every generation is recorded
in an append-only run log keyed by a hash of (prompt, config fingerprint);
re-running a partially completed run issues requests only for missing keys.
Credentials are read from a named environment variable at request time and
never written to logs or run files.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import requests

from .core import InstructionInstance, derive_rng


class GatewayError(RuntimeError):
    pass


class AuthenticationError(GatewayError):
    pass


class RateLimitError(GatewayError):
    pass


class NetworkError(GatewayError):
    pass


class MalformedResponseError(GatewayError):
    pass


class InsufficientExemplarsError(ValueError):
    pass


class DimensionMismatchError(GatewayError):
    pass


ENDPOINT_STYLES = ("chat", "completion", "edit")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    style: str = "completion"
    model: str | None = None
    credential_env: str | None = None  # name of the env var holding the token
    timeout: float = 60.0
    max_attempts: int = 3
    backoff_seconds: float = 0.5
    temperature: float = 0.0  # greedy by default
    max_output_tokens: int = 256
    concurrency: int = 4
    requests_per_second: float | None = None

    def __post_init__(self):
        if self.style not in ENDPOINT_STYLES:
            raise ValueError(f"unknown endpoint style {self.style!r}")

    def fingerprint(self) -> str:
        # Identifies the endpoint/decoding setup in run-log keys. The
        # credential value itself never participates.
        payload = json.dumps(
            [self.base_url, self.style, self.model, self.temperature, self.max_output_tokens],
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_json(cls, path: str | Path) -> "EndpointConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**raw)


@dataclass(frozen=True)
class FewShotSpec:
    """Exemplar sampling for few-shot prompting: same-task draws without replacement."""

    pool: Sequence[InstructionInstance]
    shot_count: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.shot_count < 0:
            raise ValueError("shot_count must be >= 0")


EXEMPLAR_SEPARATOR = "\n\n"


def build_prompt(
    instance: InstructionInstance,
    fewshot: FewShotSpec | None = None,
    query_index: int = 0,
) -> str:
    """Zero-shot: the instance input itself. Few-shot: exemplar blocks, then the query.

    Exemplars are drawn per query (stream keyed by the spec seed and query
    index) from pool entries sharing the instance's task; each block shows
    the exemplar's input and its revised reference on the next line.
    """
    if fewshot is None or fewshot.shot_count == 0:
        return instance.input
    candidates = [ex for ex in fewshot.pool if ex.task == instance.task and ex.input != instance.input]
    if len(candidates) < fewshot.shot_count:
        raise InsufficientExemplarsError(
            f"need {fewshot.shot_count} same-task exemplars, pool has {len(candidates)}"
        )
    rng = derive_rng(fewshot.seed, "fewshot", instance.task.value, str(query_index))
    exemplars = rng.sample(candidates, fewshot.shot_count)
    blocks = [f"{ex.input}\n{ex.target}" for ex in exemplars]
    return EXEMPLAR_SEPARATOR.join(blocks + [instance.input])


class RunLog:
    """Append-only JSONL log of completed generations, keyed for resumption."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._entries[rec["key"]] = rec["output"]

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def record(self, key: str, prompt: str, output: str, attempts: int) -> None:
        rec = {
            "key": key,
            "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
            "output": output,
            "attempts": attempts,
            "timestamp": time.time(),
        }
        with self._lock:
            self._entries[key] = output
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def request_key(config: EndpointConfig, prompt: str, edit_instruction: str | None = None) -> str:
    h = hashlib.sha256()
    h.update(config.fingerprint().encode())
    h.update(b"\x00")
    h.update(prompt.encode("utf-8"))
    if edit_instruction is not None:
        h.update(b"\x00")
        h.update(edit_instruction.encode("utf-8"))
    return h.hexdigest()


class _RateLimiter:
    def __init__(self, per_second: float | None):
        self.interval = 1.0 / per_second if per_second else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = max(0.0, self._next_at - now)
            self._next_at = max(now, self._next_at) + self.interval
        if delay:
            time.sleep(delay)


def _build_request(config: EndpointConfig, prompt: str, edit_instruction: str | None) -> dict[str, Any]:
    body: dict[str, Any] = {"temperature": config.temperature}
    if config.model:
        body["model"] = config.model
    if config.style == "chat":
        body["messages"] = [{"role": "user", "content": prompt}]
        body["max_tokens"] = config.max_output_tokens
    elif config.style == "completion":
        body["prompt"] = prompt
        body["max_tokens"] = config.max_output_tokens
    else:  # edit style: the prompt carries the bare source text
        if edit_instruction is None:
            raise GatewayError("edit-style endpoints require an edit_instruction")
        body["input"] = prompt
        body["instruction"] = edit_instruction
    return body


def _extract_output(config: EndpointConfig, payload: Any) -> str:
    try:
        if config.style == "chat":
            text = payload["choices"][0]["message"]["content"]
        else:
            text = payload["choices"][0]["text"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseError(f"unexpected response shape: {exc!r}") from exc
    if not isinstance(text, str) or not text.strip():
        raise MalformedResponseError("endpoint returned an empty output")
    return text.strip()


def _headers(config: EndpointConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if config.credential_env:
        token = os.environ.get(config.credential_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


def generate(
    config: EndpointConfig,
    prompt: str,
    edit_instruction: str | None = None,
    run_log: RunLog | None = None,
    session: requests.Session | None = None,
    _limiter: _RateLimiter | None = None,
) -> str:
    """One generation with retry/backoff; the result lands in the run log first."""
    key = request_key(config, prompt, edit_instruction)
    if run_log is not None and key in run_log:
        return run_log.get(key)  # type: ignore[return-value]
    body = _build_request(config, prompt, edit_instruction)
    http = session or requests
    last_error: Exception | None = None
    attempts = 0
    for attempt in range(1, config.max_attempts + 1):
        attempts = attempt
        if _limiter is not None:
            _limiter.wait()
        try:
            resp = http.post(
                config.base_url, json=body, headers=_headers(config), timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = NetworkError(f"request failed: {exc}")
            time.sleep(config.backoff_seconds * (2 ** (attempt - 1)))
            continue
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"endpoint returned {resp.status_code}")
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = RateLimitError(f"endpoint returned {resp.status_code}")
            time.sleep(config.backoff_seconds * (2 ** (attempt - 1)))
            continue
        if resp.status_code != 200:
            raise GatewayError(f"endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedResponseError("response body is not JSON") from exc
        output = _extract_output(config, payload)
        if run_log is not None:
            run_log.record(key, prompt, output, attempts)
        return output
    raise last_error if last_error is not None else GatewayError("no attempts made")


def generate_many(
    config: EndpointConfig,
    prompts: Sequence[str],
    edit_instructions: Sequence[str | None] | None = None,
    run_log: RunLog | None = None,
) -> list[str]:
    """Bounded-concurrency generation preserving prompt order."""
    edits = edit_instructions or [None] * len(prompts)
    limiter = _RateLimiter(config.requests_per_second)
    session = requests.Session()
    results: list[str | None] = [None] * len(prompts)

    def work(i: int) -> None:
        results[i] = generate(
            config, prompts[i], edits[i], run_log=run_log, session=session, _limiter=limiter
        )

    with ThreadPoolExecutor(max_workers=max(1, config.concurrency)) as pool:
        futures = [pool.submit(work, i) for i in range(len(prompts))]
        for fut in futures:
            fut.result()
    return results  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# External scorers


def _post_scorer(config: EndpointConfig, body: dict[str, Any]) -> Any:
    last_error: Exception | None = None
    for attempt in range(1, config.max_attempts + 1):
        try:
            resp = requests.post(
                config.base_url, json=body, headers=_headers(config), timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = NetworkError(f"scorer request failed: {exc}")
            time.sleep(config.backoff_seconds * (2 ** (attempt - 1)))
            continue
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"scorer returned {resp.status_code}")
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = RateLimitError(f"scorer returned {resp.status_code}")
            time.sleep(config.backoff_seconds * (2 ** (attempt - 1)))
            continue
        if resp.status_code != 200:
            raise GatewayError(f"scorer returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponseError("scorer response is not JSON") from exc
    raise last_error if last_error is not None else GatewayError("no attempts made")


def score_formality(texts: Sequence[str], config: EndpointConfig) -> float:
    """Percentage of texts the classifier marks as the target style.

    Accepts either {"labels": [...]} with "formal"/"polite"/"positive"/"1"
    counted as hits, or {"probabilities": [...]} thresholded at 0.5.
    """
    if not texts:
        raise GatewayError("score_formality needs at least one text")
    payload = _post_scorer(config, {"texts": list(texts)})
    if isinstance(payload, dict) and "probabilities" in payload:
        values = payload["probabilities"]
        if len(values) != len(texts):
            raise MalformedResponseError("classifier returned wrong number of probabilities")
        hits = sum(1 for p in values if float(p) >= 0.5)
    elif isinstance(payload, dict) and "labels" in payload:
        values = payload["labels"]
        if len(values) != len(texts):
            raise MalformedResponseError("classifier returned wrong number of labels")
        positive = {"formal", "polite", "positive", "1", "true", "yes"}
        hits = sum(1 for label in values if str(label).lower() in positive)
    else:
        raise MalformedResponseError("classifier response lacks labels/probabilities")
    return 100.0 * hits / len(texts)


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise DimensionMismatchError(f"embedding dims differ: {len(a)} vs {len(b)}")
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def semantic_similarity(pairs: Sequence[tuple[str, str]], config: EndpointConfig) -> float:
    """Mean cosine similarity (x100, clamped to [0, 100]) of embedding pairs."""
    if not pairs:
        raise GatewayError("semantic_similarity needs at least one pair")
    flat: list[str] = []
    for a, b in pairs:
        flat.extend((a, b))
    payload = _post_scorer(config, {"texts": flat})
    if not isinstance(payload, dict) or "embeddings" not in payload:
        raise MalformedResponseError("embedding response lacks 'embeddings'")
    embeddings = payload["embeddings"]
    if len(embeddings) != len(flat):
        raise MalformedResponseError("embedder returned wrong number of vectors")
    sims = [_cosine(embeddings[2 * i], embeddings[2 * i + 1]) for i in range(len(pairs))]
    return min(100.0, max(0.0, 100.0 * sum(sims) / len(sims)))
