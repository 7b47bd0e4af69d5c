"""Pairwise consistency ratings from a chat-completions LLM endpoint (or a mock).

Each claim pair is sent ``n_repeats`` times with a fixed system prompt; the
integer rating (0-10) that ends each reply is extracted and the replies are
aggregated into a histogram with summary statistics and a bimodality flag.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "SHEAFCHECK_API_KEY"
N_BINS = 11


class OracleError(Exception):
    pass


class ClaimError(OracleError, ValueError):
    pass


class MissingApiKey(OracleError):
    pass


class TransportError(OracleError):
    pass


class OracleTransportError(OracleError):
    """Raised when some calls exhausted their retries; carries what was collected."""

    def __init__(self, message: str, partial: RatingDistribution):
        super().__init__(message)
        self.partial = partial


class InsufficientSamples(OracleError, ValueError):
    pass


class NoFixture(OracleError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


_UNESCAPED_BRACKET = re.compile(r"(?<!\\)[\[\]]")


@dataclass(frozen=True)
class ClaimText:
    id: str
    text: str

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ClaimError(f"claim {self.id!r} has empty text")
        if _UNESCAPED_BRACKET.search(self.text):
            raise ClaimError(f"claim {self.id!r} contains an unescaped square bracket")


def _claim(c) -> ClaimText:
    return c if isinstance(c, ClaimText) else ClaimText(str(c), str(c))


def system_prompt() -> str:
    return resources.files("sheafcheck").joinpath("data/initialization_prompt.txt").read_bytes().decode("utf-8")


def user_message(a, b) -> str:
    a, b = _claim(a), _claim(b)
    return f"evalConsistency: [{a.text}] [{b.text}]"


def build_prompt(a, b) -> list[dict]:
    return [
        {"role": "system", "content": system_prompt()},
        {"role": "user", "content": user_message(a, b)},
    ]


_USER_RE = re.compile(r"^evalConsistency: \[(.*)\] \[(.*)\]$", re.S)


def parse_user_message(content: str) -> tuple[str, str]:
    m = _USER_RE.match(content)
    if not m:
        raise OracleError(f"not an evalConsistency query: {content[:60]!r}")
    return m.group(1), m.group(2)


# -- rating extraction ---------------------------------------------------

_NUM = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?(?![\w])")
_TRAILING = " \t\r\n.!?,;:*_\"'`)]}”’"
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")
_OUT_OF_TEN = re.compile(r"(\d+)\s*(?:/|out of)\s*10$")


def extract_rating(reply: str | None) -> int | None:
    """The integer rating at the end of a reply, or ``None`` when there is none.

    Only the final sentence is scanned, and its last number must be an integer
    in 0..10. ``7/10`` and ``7 out of 10`` read as 7.
    """
    if not reply:
        return None
    tail = reply.rstrip(_TRAILING)
    if not tail:
        return None
    last = [s for s in _SENTENCE_SPLIT.split(tail) if s.strip()]
    if not last:
        return None
    sentence = last[-1].rstrip(_TRAILING)
    m = _OUT_OF_TEN.search(sentence)
    if m:
        tok = m.group(1)
    else:
        nums = _NUM.findall(sentence)
        if not nums:
            return None
        tok = nums[-1]
    if not re.fullmatch(r"\d+", tok):
        return None
    r = int(tok)
    return r if 0 <= r <= 10 else None


# -- distributions -------------------------------------------------------


@dataclass(frozen=True)
class RatingSample:
    raw: str | None
    rating: int | None
    latency_ms: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.rating is not None


@dataclass(frozen=True)
class RatingDistribution:
    counts: tuple[int, ...]
    n_fail: int = 0
    samples: tuple[RatingSample, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if len(self.counts) != N_BINS or any(c < 0 for c in self.counts):
            raise ValueError("counts must be 11 non-negative bins")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @classmethod
    def from_ratings(cls, ratings: Iterable[int | None]) -> RatingDistribution:
        counts = [0] * N_BINS
        fail = 0
        for r in ratings:
            if r is None:
                fail += 1
            else:
                if not 0 <= r <= 10:
                    raise ValueError(f"rating {r} outside 0..10")
                counts[r] += 1
        return cls(tuple(counts), fail)

    @classmethod
    def from_samples(cls, samples: Sequence[RatingSample]) -> RatingDistribution:
        d = cls.from_ratings(s.rating for s in samples)
        return replace(d, samples=tuple(samples))

    @property
    def n_success(self) -> int:
        return sum(self.counts)

    @property
    def n_total(self) -> int:
        return self.n_success + self.n_fail

    @property
    def mean(self) -> Fraction | None:
        n = self.n_success
        if n == 0:
            return None
        return Fraction(sum(i * c for i, c in enumerate(self.counts)), n)

    @property
    def variance(self) -> Fraction | None:
        """Population variance."""
        mu = self.mean
        if mu is None:
            return None
        return sum((c * (i - mu) ** 2 for i, c in enumerate(self.counts)), Fraction(0)) / self.n_success

    @property
    def std(self) -> float | None:
        v = self.variance
        return None if v is None else math.sqrt(v)

    @property
    def bimodal(self) -> bool | None:
        if self.n_success < MIN_BIMODALITY_SAMPLES:
            return None
        return detect_bimodality(self)

    def merged(self, other: RatingDistribution) -> RatingDistribution:
        return RatingDistribution(
            tuple(a + b for a, b in zip(self.counts, other.counts)),
            self.n_fail + other.n_fail,
            self.samples + other.samples,
        )

    def to_json(self) -> dict:
        mean = self.mean
        return {
            "counts": list(self.counts),
            "n_success": self.n_success,
            "n_fail": self.n_fail,
            "mean": None if mean is None else float(mean),
            "std": None if self.std is None else round(self.std, 12),
            "bimodal": self.bimodal,
        }

    @classmethod
    def from_json(cls, obj: dict) -> RatingDistribution:
        """Accepts ``{"counts": [...11], "n_fail"?}``, ``{"histogram": {bin: n}}`` or ``{"samples": [...]}``."""
        if "samples" in obj:
            return cls.from_ratings(obj["samples"])
        if "counts" in obj:
            counts = list(obj["counts"])
        elif "histogram" in obj:
            counts = [0] * N_BINS
            for k, v in obj["histogram"].items():
                counts[int(k)] += int(v)
        else:
            raise ValueError("rating record needs 'counts', 'histogram' or 'samples'")
        return cls(tuple(counts), int(obj.get("n_fail", 0)))


MIN_BIMODALITY_SAMPLES = 10
BIMODAL_MIN_SEPARATION = 4
BIMODAL_MIN_MASS = Fraction(1, 5)


def _local_maxima(counts: Sequence[int]) -> list[int]:
    # plateaus count once, at their right end
    out = []
    for i, c in enumerate(counts):
        left = counts[i - 1] if i > 0 else 0
        right = counts[i + 1] if i + 1 < len(counts) else 0
        if c > 0 and c >= left and c > right:
            out.append(i)
    return out


def detect_bimodality(
    d: RatingDistribution,
    min_separation: int = BIMODAL_MIN_SEPARATION,
    min_mass: Fraction = BIMODAL_MIN_MASS,
) -> bool:
    """Two local maxima at least ``min_separation`` bins apart, each holding
    at least ``min_mass`` of the successful ratings."""
    n = d.n_success
    if n < MIN_BIMODALITY_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_BIMODALITY_SAMPLES} ratings, have {n}")
    heavy = [i for i in _local_maxima(d.counts) if Fraction(d.counts[i], n) >= min_mass]
    return any(j - i >= min_separation for i in heavy for j in heavy)


# -- triage --------------------------------------------------------------

ACCEPT, REPROMPT, ESCALATE = "accept", "reprompt", "escalate"


@dataclass(frozen=True)
class TriagePolicy:
    std_threshold: float = 2.0
    max_reprompts: int = 1
    stronger_model: str | None = None
    min_separation: int = BIMODAL_MIN_SEPARATION
    min_mass: Fraction = BIMODAL_MIN_MASS


def triage(d: RatingDistribution, policy: TriagePolicy = TriagePolicy(), reprompts: int = 0) -> str:
    if d.n_success == 0:
        unstable = True
        why = "no ratings"
    else:
        bimodal = d.n_success >= MIN_BIMODALITY_SAMPLES and detect_bimodality(d, policy.min_separation, policy.min_mass)
        unstable = bimodal or d.std > policy.std_threshold
        why = "bimodal" if bimodal else f"std={d.std:.3f}"
    if not unstable:
        decision = ACCEPT
    elif reprompts < policy.max_reprompts:
        decision = REPROMPT
    else:
        decision = ESCALATE
    log.info("triage: %s (%s, after %d reprompts)", decision, why, reprompts)
    return decision


# -- clients -------------------------------------------------------------


@dataclass(frozen=True)
class OracleConfig:
    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-4"
    temperature: float | None = None
    n_repeats: int = 100
    timeout: float = 60.0
    max_retries: int = 1
    max_in_flight: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be at least 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0 or self.max_in_flight < 1:
            raise ValueError("bad retry/in-flight limits")

    def to_json(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "temperature": self.temperature,
            "n_repeats": self.n_repeats,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "max_in_flight": self.max_in_flight,
            "seed": self.seed,
        }


class HttpChatClient:
    """Minimal chat-completions client. Thread-safe (shares one ``httpx.Client``)."""

    def __init__(self, cfg: OracleConfig, api_key: str | None = None, http: httpx.Client | None = None):
        if api_key is None:
            api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise MissingApiKey(f"set {API_KEY_ENV} to use a live endpoint")
        self.cfg = cfg
        self.http = http or httpx.Client(timeout=cfg.timeout)
        self.headers = {"Authorization": f"Bearer {api_key}"}
        self.url = cfg.endpoint.rstrip("/") + "/chat/completions"

    def body(self, messages) -> dict:
        body = {"model": self.cfg.model, "messages": messages}
        if self.cfg.temperature is not None:
            body["temperature"] = self.cfg.temperature
        return body

    def complete(self, messages) -> str:
        last = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                resp = self.http.post(self.url, json=self.body(messages), headers=self.headers, timeout=self.cfg.timeout)
            except httpx.TransportError as exc:
                last = repr(exc)
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    data = resp.json()
                    return data["choices"][0]["message"]["content"] or ""
            log.warning("chat call failed (%s), attempt %d/%d", last, attempt + 1, self.cfg.max_retries + 1)
        raise TransportError(f"endpoint unreachable after {self.cfg.max_retries + 1} attempts: {last}")


def pair_key(a: str, b: str) -> str:
    return hashlib.sha256(f"{a}\x1f{b}".encode("utf-8")).hexdigest()[:16]


class MockChatClient:
    """Canned replies keyed by claim pair.

    ``replies`` maps ``(text_a, text_b)`` to a list of reply strings. Replies
    are served round-robin, or drawn with a seeded RNG when ``sample=True``.
    A ``responder(a, b, i)`` callable may be given instead.
    """

    def __init__(
        self,
        replies: dict[tuple[str, str], Sequence[str]] | None = None,
        *,
        responder: Callable[[str, str, int], str] | None = None,
        sample: bool = False,
        seed: int = 0,
    ):
        self.replies = {pair_key(a, b): list(v) for (a, b), v in (replies or {}).items()}
        self.responder = responder
        self.sample = sample
        self.rng = random.Random(seed)
        self.calls: dict[str, int] = {}
        self.lock = threading.Lock()

    @classmethod
    def from_fixtures(cls, directory: str | os.PathLike, sample: bool = False, seed: int = 0) -> MockChatClient:
        replies = {}
        for p in sorted(Path(directory).glob("*.json")):
            obj = json.loads(p.read_text(encoding="utf-8"))
            replies[(obj["a"], obj["b"])] = obj["replies"]
        return cls(replies, sample=sample, seed=seed)

    def has_pair(self, a: str, b: str) -> bool:
        return self.responder is not None or pair_key(a, b) in self.replies

    def complete(self, messages) -> str:
        a, b = parse_user_message(messages[-1]["content"])
        key = pair_key(a, b)
        with self.lock:
            i = self.calls.get(key, 0)
            self.calls[key] = i + 1
            if self.responder is not None:
                return self.responder(a, b, i)
            if key not in self.replies:
                raise NoFixture(f"no recorded replies for pair [{a}] [{b}]")
            pool = self.replies[key]
            return self.rng.choice(pool) if self.sample else pool[i % len(pool)]


def write_fixture(directory: str | os.PathLike, a: str, b: str, replies: Sequence[str]) -> Path:
    path = Path(directory) / f"{pair_key(a, b)}.json"
    path.write_text(json.dumps({"a": a, "b": b, "replies": list(replies)}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def mock_transport(responder: Callable[[list[dict], dict], str]) -> httpx.MockTransport:
    """An in-process chat-completions endpoint for exercising ``HttpChatClient``.

    ``responder(messages, body)`` returns the assistant reply text.
    """

    def handler(request: httpx.Request) -> httpx.Response:
        if request.method != "POST" or not request.url.path.endswith("/chat/completions"):
            return httpx.Response(404, json={"error": "not found"})
        body = json.loads(request.content)
        reply = responder(body["messages"], body)
        return httpx.Response(
            200,
            json={
                "object": "chat.completion",
                "model": body.get("model"),
                "choices": [{"index": 0, "message": {"role": "assistant", "content": reply}, "finish_reason": "stop"}],
            },
        )

    return httpx.MockTransport(handler)


# -- rating a pair -------------------------------------------------------


def _one_call(client, messages) -> RatingSample:
    t0 = time.perf_counter()
    try:
        raw = client.complete(messages)
    except TransportError as exc:
        return RatingSample(None, None, (time.perf_counter() - t0) * 1e3, error=str(exc))
    return RatingSample(raw, extract_rating(raw), (time.perf_counter() - t0) * 1e3)


def rate_pair(cfg: OracleConfig, a, b, client=None) -> RatingDistribution:
    """Send the pair ``cfg.n_repeats`` times and aggregate the ratings.

    Failed extractions and calls that exhausted their retries both count in
    ``n_fail``; if any call failed in transport, ``OracleTransportError`` is
    raised with the partial distribution attached.
    """
    if client is None:
        client = HttpChatClient(cfg)
    messages = build_prompt(a, b)
    n = cfg.n_repeats
    if cfg.max_in_flight == 1 or n == 1:
        samples = [_one_call(client, messages) for _ in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=min(cfg.max_in_flight, n)) as pool:
            samples = list(pool.map(lambda _: _one_call(client, messages), range(n)))
    dist = RatingDistribution.from_samples(samples)
    errors = [s.error for s in samples if s.error]
    if errors:
        raise OracleTransportError(f"{len(errors)} of {n} calls failed in transport: {errors[0]}", dist)
    return dist


@dataclass(frozen=True)
class TriageStep:
    decision: str
    model: str
    order: tuple[str, str]
    distribution: RatingDistribution


def rate_with_triage(cfg: OracleConfig, a, b, client_for: Callable[[OracleConfig], object], policy: TriagePolicy = TriagePolicy()) -> list[TriageStep]:
    """Rate, then reprompt with the claim order swapped, then escalate to
    ``policy.stronger_model`` as triage demands. Returns every step taken."""
    a, b = _claim(a), _claim(b)
    steps: list[TriageStep] = []
    order = (a, b)
    reprompts = 0
    cur = cfg
    while True:
        d = rate_pair(cur, *order, client=client_for(cur))
        decision = triage(d, policy, reprompts)
        steps.append(TriageStep(decision, cur.model, (order[0].text, order[1].text), d))
        if decision == ACCEPT:
            return steps
        if decision == REPROMPT:
            reprompts += 1
            order = order[::-1]
            continue
        if policy.stronger_model is None or cur.model == policy.stronger_model:
            return steps
        cur = replace(cur, model=policy.stronger_model)
        order = (a, b)
        reprompts = 0
