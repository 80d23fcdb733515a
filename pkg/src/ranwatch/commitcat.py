"""Commit categorization into protocol layers and functional components.

A commit message is scored against a weighted keyword rule set: strong
keywords count 2.0, medium 1.0, weak 0.5, each distinct keyword at most
once per commit, matching case-insensitive substrings. A category is
affected when its score reaches the category threshold (default 1.0, so
one medium keyword or two weak ones suffice). A decision table maps the
evidence summary (layer count, component count, total evidence, strong
matches) to a confidence grade; only medium- and low-confidence drafts are
sent to the optional refinement service.

The categorization result is flattened into a fixed 34-slot feature
vector consumed by the risk model. The slot order is a stable contract:
changing it requires a new store schema version.
"""

from __future__ import annotations

import concurrent.futures
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError
from .refine import (
    MAX_REFINED_LAYERS,
    RefineRequest,
    RefinementClient,
)

LAYERS: tuple[str, ...] = (
    "PHY",
    "MAC",
    "RLC",
    "PDCP",
    "RRC",
    "NAS",
    "NGAP",
    "F1AP",
    "E1AP",
)

COMPONENTS: tuple[str, ...] = (
    "memory",
    "threading",
    "radio",
    "scheduler",
    "timer",
    "queue",
)

CATEGORIES: tuple[str, ...] = LAYERS + COMPONENTS

CHANGE_TYPES: tuple[str, ...] = ("bugfix", "optimization", "feature", "refactoring")
DEFAULT_CHANGE_TYPE = "refactoring"

CONFIDENCE_GRADES: tuple[str, ...] = ("high", "medium", "low")

STRENGTH_WEIGHTS: dict[str, float] = {"strong": 2.0, "medium": 1.0, "weak": 0.5}

_MERGE_REF_RE = re.compile(r"!\d+")


@dataclass(frozen=True)
class KeywordRule:
    category: str
    keyword: str
    strength: str

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r}")
        if self.strength not in STRENGTH_WEIGHTS:
            raise ConfigError(f"unknown keyword strength {self.strength!r}")
        if not self.keyword:
            raise ConfigError("keyword must be non-empty")

    @property
    def weight(self) -> float:
        return STRENGTH_WEIGHTS[self.strength]


@dataclass(frozen=True)
class ConfidenceTable:
    """Thresholds of the confidence decision table.

    high requires at least one strong match, total evidence at or above
    ``high_evidence_min``, and a small affected set; medium requires
    total evidence of at least ``medium_evidence_min``.
    """

    high_strong_min: int = 1
    high_evidence_min: float = 2.0
    high_layer_max: int = 2
    high_component_max: int = 2
    medium_evidence_min: float = 1.0


@dataclass(frozen=True)
class RuleConfig:
    keywords: tuple[KeywordRule, ...]
    thresholds: Mapping[str, float]  # per-category affectedness threshold
    change_type_rules: tuple[tuple[str, str], ...]  # (change_type, keyword)
    confidence: ConfidenceTable = ConfidenceTable()

    def threshold(self, category: str) -> float:
        return float(self.thresholds.get(category, 1.0))


@dataclass(frozen=True)
class CommitText:
    hash: str
    message: str
    files_changed: int
    lines_added: int
    lines_deleted: int


@dataclass(frozen=True)
class CategorizationResult:
    affected: tuple[str, ...]  # subset of CATEGORIES in canonical order
    scores: Mapping[str, float]
    layer_count: int
    component_count: int
    evidence_total: float  # sum of all matched keyword weights
    strong_matches: int  # matched strong rules
    confidence: str
    change_type: str
    refined_by_llm: bool
    rationale: str = ""

    @property
    def layers(self) -> tuple[str, ...]:
        return tuple(c for c in self.affected if c in LAYERS)

    @property
    def components(self) -> tuple[str, ...]:
        return tuple(c for c in self.affected if c in COMPONENTS)


# ---------------------------------------------------------------------------
# default rule set


def default_keyword_rules() -> tuple[KeywordRule, ...]:
    table: dict[str, list[tuple[str, str]]] = {
        "PHY": [
            ("L1", "strong"),
            ("PHY", "strong"),
            ("NR_PHY", "strong"),
            ("prach", "medium"),
            ("dlsch", "medium"),
            ("ulsch", "medium"),
            ("fapi", "medium"),
            ("ofdm", "medium"),
            ("tx", "weak"),
            ("rx", "weak"),
        ],
        "MAC": [
            ("MAC", "strong"),
            ("NR_MAC", "strong"),
            ("MSG3", "strong"),
            ("LogicalChannelConfig", "strong"),
            ("msg2", "medium"),
            ("harq", "medium"),
            ("bsr", "medium"),
            ("dci", "medium"),
            ("mcs", "weak"),
        ],
        "RLC": [
            ("RLC", "strong"),
            ("rlc_am", "medium"),
            ("sdu", "weak"),
        ],
        "PDCP": [
            ("PDCP", "strong"),
            ("rohc", "medium"),
            ("ciphering", "medium"),
            ("integrity", "weak"),
        ],
        "RRC": [
            ("RRC", "strong"),
            ("SIB1", "medium"),
            ("cellGroupConfig", "medium"),
            ("reestablishment", "weak"),
        ],
        "NAS": [
            ("NAS", "strong"),
            ("registration request", "medium"),
            ("pdu session", "medium"),
        ],
        "NGAP": [
            ("NGAP", "strong"),
            ("ng setup", "medium"),
            ("amf", "medium"),
        ],
        "F1AP": [
            ("F1AP", "strong"),
            ("f1 setup", "medium"),
            ("f1-c", "medium"),
        ],
        "E1AP": [
            ("E1AP", "strong"),
            ("e1 setup", "medium"),
            ("cu-up", "medium"),
        ],
        "memory": [
            ("memory leak", "strong"),
            ("use-after-free", "strong"),
            ("memcpy", "medium"),
            ("malloc", "medium"),
            ("memory", "medium"),
            ("buffer", "weak"),
        ],
        "threading": [
            ("deadlock", "strong"),
            ("pthread", "strong"),
            ("mutex", "medium"),
            ("thread", "medium"),
            ("race", "weak"),
        ],
        "radio": [
            ("rfsimulator", "strong"),
            ("usrp", "strong"),
            ("radio", "medium"),
            ("antenna", "medium"),
            ("gain", "weak"),
            ("channel", "weak"),
        ],
        "scheduler": [
            ("gNB_scheduler", "strong"),
            ("nr_schedule", "medium"),
            ("schedul", "weak"),
        ],
        "timer": [
            ("t_reordering", "strong"),
            ("timer", "medium"),
            ("timeout", "medium"),
            ("expiry", "weak"),
        ],
        "queue": [
            ("enqueue", "medium"),
            ("dequeue", "medium"),
            ("queue", "medium"),
            ("fifo", "medium"),
            ("backlog", "weak"),
        ],
    }
    rules = []
    for category in CATEGORIES:
        for keyword, strength in table[category]:
            rules.append(KeywordRule(category, keyword, strength))
    return tuple(rules)


# a single weak memory cue like "buffer" should still mark the component;
# this mirrors the curated production rule set
DEFAULT_THRESHOLDS: dict[str, float] = {"memory": 0.5}

DEFAULT_CHANGE_TYPE_RULES: tuple[tuple[str, str], ...] = (
    ("bugfix", "fix"),
    ("bugfix", "bug"),
    ("bugfix", "crash"),
    ("bugfix", "correct"),
    ("bugfix", "fault"),
    ("optimization", "optimi"),
    ("optimization", "speedup"),
    ("optimization", "speed up"),
    ("optimization", "faster"),
    ("optimization", "latency"),
    ("feature", "add"),
    ("feature", "support"),
    ("feature", "implement"),
    ("feature", "introduce"),
    ("feature", "enable"),
    ("refactoring", "refactor"),
    ("refactoring", "rework"),
    ("refactoring", "cleanup"),
    ("refactoring", "clean up"),
    ("refactoring", "simplif"),
    ("refactoring", "rename"),
    ("refactoring", "restructure"),
    ("refactoring", "remove"),
)


def default_rule_config() -> RuleConfig:
    return RuleConfig(
        keywords=default_keyword_rules(),
        thresholds=dict(DEFAULT_THRESHOLDS),
        change_type_rules=DEFAULT_CHANGE_TYPE_RULES,
        confidence=ConfidenceTable(),
    )


# ---------------------------------------------------------------------------
# rule file parsing

_SECTION_RE = re.compile(r"^\[(?P<name>[a-z_]+)\]$")


def load_rule_config(path: str | Path) -> RuleConfig:
    """Parse a keyword rule file.

    Sections: [keywords] with ``category, strength, keyword`` entries (the
    keyword is everything after the second comma, so it may itself contain
    commas), [thresholds] with ``category = value`` overrides,
    [change_types] with ``type, keyword`` entries, and [confidence] with
    ``name = value`` overrides of the decision table.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"rule file not found: {path}")
    keywords: list[KeywordRule] = []
    thresholds: dict[str, float] = {}
    change_rules: list[tuple[str, str]] = []
    confidence_kwargs: dict[str, float] = {}
    section = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _SECTION_RE.match(line)
        if match:
            section = match.group("name")
            if section not in ("keywords", "thresholds", "change_types", "confidence"):
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            continue
        if section == "keywords":
            parts = line.split(",", 2)
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 'category, strength, keyword'")
            category, strength, keyword = (p.strip() for p in parts)
            try:
                keywords.append(KeywordRule(category, strength=strength, keyword=keyword))
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        elif section == "thresholds":
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'category = value'")
            category, raw_value = (p.strip() for p in line.split("=", 1))
            if category not in CATEGORIES:
                raise ConfigError(f"{path}:{lineno}: unknown category {category!r}")
            try:
                thresholds[category] = float(raw_value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad threshold: {raw_value!r}") from exc
        elif section == "change_types":
            parts = line.split(",", 1)
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'type, keyword'")
            change_type, keyword = (p.strip() for p in parts)
            if change_type not in CHANGE_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown change type {change_type!r}")
            if not keyword:
                raise ConfigError(f"{path}:{lineno}: empty change-type keyword")
            change_rules.append((change_type, keyword))
        elif section == "confidence":
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'name = value'")
            name, raw_value = (p.strip() for p in line.split("=", 1))
            if name not in ConfidenceTable.__dataclass_fields__:
                raise ConfigError(f"{path}:{lineno}: unknown confidence field {name!r}")
            try:
                confidence_kwargs[name] = float(raw_value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value: {raw_value!r}") from exc
        else:
            raise ConfigError(f"{path}:{lineno}: entry outside any section")
    if not keywords:
        raise ConfigError(f"{path}: no keyword rules defined")
    table = ConfidenceTable(
        high_strong_min=int(confidence_kwargs.get("high_strong_min", 1)),
        high_evidence_min=float(confidence_kwargs.get("high_evidence_min", 2.0)),
        high_layer_max=int(confidence_kwargs.get("high_layer_max", 2)),
        high_component_max=int(confidence_kwargs.get("high_component_max", 2)),
        medium_evidence_min=float(confidence_kwargs.get("medium_evidence_min", 1.0)),
    )
    return RuleConfig(
        keywords=tuple(keywords),
        thresholds=thresholds,
        change_type_rules=tuple(change_rules) if change_rules else DEFAULT_CHANGE_TYPE_RULES,
        confidence=table,
    )


# ---------------------------------------------------------------------------
# scoring


def keyword_score(message: str, rules: Sequence[KeywordRule], category: str) -> float:
    """Weighted keyword score of one category for one commit message."""
    text = message.lower()
    score = 0.0
    seen: set[str] = set()
    for rule in rules:
        if rule.category != category:
            continue
        key = rule.keyword.lower()
        if key in seen:
            continue
        if key in text:
            seen.add(key)
            score += rule.weight
    return score


def detect_change_type(message: str, rules: Sequence[tuple[str, str]]) -> str:
    """First change type in priority order with any keyword evidence."""
    text = message.lower()
    matched = {ct for ct, keyword in rules if keyword.lower() in text}
    for change_type in CHANGE_TYPES:
        if change_type in matched:
            return change_type
    return DEFAULT_CHANGE_TYPE


def confidence_rule(
    layer_count: int,
    component_count: int,
    evidence_total: float,
    strong_matches: int,
    table: ConfidenceTable = ConfidenceTable(),
) -> str:
    if (
        strong_matches >= table.high_strong_min
        and evidence_total >= table.high_evidence_min
        and layer_count <= table.high_layer_max
        and component_count <= table.high_component_max
    ):
        return "high"
    if evidence_total >= table.medium_evidence_min:
        return "medium"
    return "low"


def categorize_keywords(commit: CommitText, config: RuleConfig) -> CategorizationResult:
    """Pure keyword-stage categorization of one commit."""
    text = commit.message.lower()
    scores: dict[str, float] = {}
    evidence_total = 0.0
    strong_matches = 0
    for category in CATEGORIES:
        matched_keys: set[str] = set()
        score = 0.0
        for rule in config.keywords:
            if rule.category != category:
                continue
            key = rule.keyword.lower()
            if key in matched_keys or key not in text:
                continue
            matched_keys.add(key)
            score += rule.weight
            evidence_total += rule.weight
            if rule.strength == "strong":
                strong_matches += 1
        scores[category] = score
    affected = tuple(c for c in CATEGORIES if scores[c] >= config.threshold(c))
    layer_count = sum(1 for c in affected if c in LAYERS)
    component_count = len(affected) - layer_count
    confidence = confidence_rule(
        layer_count, component_count, evidence_total, strong_matches, config.confidence
    )
    return CategorizationResult(
        affected=affected,
        scores=scores,
        layer_count=layer_count,
        component_count=component_count,
        evidence_total=evidence_total,
        strong_matches=strong_matches,
        confidence=confidence,
        change_type=detect_change_type(commit.message, config.change_type_rules),
        refined_by_llm=False,
    )


def refine_draft(
    commit: CommitText,
    draft: CategorizationResult,
    client: RefinementClient,
) -> tuple[CategorizationResult, str]:
    """Send a medium- or low-confidence draft to the refinement service.

    Returns the refined result (or the draft on fallback) and the outcome
    status. High-confidence drafts must not be sent here.
    """
    if draft.confidence == "high":
        raise ValueError("high-confidence drafts are not refined")
    request = RefineRequest(
        commit_hash=commit.hash,
        message=commit.message,
        draft_layers=draft.layers,
        draft_components=draft.components,
        draft_change_type=draft.change_type,
        layer_vocabulary=LAYERS,
        component_vocabulary=COMPONENTS,
        change_types=CHANGE_TYPES,
    )
    outcome = client.refine(request)
    if outcome.response is None:
        return draft, outcome.status
    response = outcome.response
    affected = tuple(
        c for c in CATEGORIES if c in set(response.layers) | set(response.components)
    )
    layer_count = sum(1 for c in affected if c in LAYERS)
    assert layer_count <= MAX_REFINED_LAYERS
    refined = CategorizationResult(
        affected=affected,
        scores=draft.scores,
        layer_count=layer_count,
        component_count=len(affected) - layer_count,
        evidence_total=draft.evidence_total,
        strong_matches=draft.strong_matches,
        confidence=draft.confidence,
        change_type=response.change_type,
        refined_by_llm=True,
        rationale=response.rationale,
    )
    return refined, outcome.status


def categorize_commits(
    commits: Sequence[CommitText],
    config: RuleConfig,
    client: RefinementClient | None = None,
    concurrency: int = 4,
) -> list[tuple[CommitText, CategorizationResult, str]]:
    """Categorize a batch, refining medium- and low-confidence drafts.

    Refinement requests run on a small thread pool; results are merged
    back by commit hash so output order matches input order regardless of
    completion order.
    """
    if concurrency < 1:
        raise ConfigError("concurrency must be >= 1")
    drafts = {c.hash: categorize_keywords(c, config) for c in commits}
    statuses = {c.hash: "keyword_high" if drafts[c.hash].confidence == "high" else "not_refined"
                for c in commits}
    if client is not None:
        pending = [c for c in commits if drafts[c.hash].confidence != "high"]
        if pending:
            with concurrent.futures.ThreadPoolExecutor(max_workers=concurrency) as pool:
                futures = {
                    pool.submit(refine_draft, commit, drafts[commit.hash], client): commit.hash
                    for commit in pending
                }
                for future in concurrent.futures.as_completed(futures):
                    commit_hash = futures[future]
                    result, status = future.result()
                    drafts[commit_hash] = result
                    statuses[commit_hash] = status
    return [(c, drafts[c.hash], statuses[c.hash]) for c in commits]


# ---------------------------------------------------------------------------
# feature vector


@dataclass(frozen=True)
class ComplexityParams:
    churn_weight: float = 0.4
    category_weight: float = 0.3
    files_weight: float = 0.3
    churn_cap: float = 1000.0
    files_cap: float = 50.0


DEFAULT_COMPLEXITY = ComplexityParams()

FEATURE_NAMES: tuple[str, ...] = (
    tuple(f"cat_{c.lower()}" for c in CATEGORIES)
    + tuple(f"type_{t}" for t in CHANGE_TYPES)
    + ("layer_count", "component_count")
    + ("files_changed", "lines_added", "lines_deleted", "total_churn", "complexity_score")
    + tuple(f"conf_{g}" for g in CONFIDENCE_GRADES)
    + ("refined_by_llm", "keyword_evidence", "strong_matches", "message_length", "merge_ref_count")
)

assert len(FEATURE_NAMES) == 34


@dataclass(frozen=True)
class CommitFeatures:
    """Fixed 34-slot numeric encoding of a categorized commit."""

    commit_hash: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {len(self.values)}")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))

    def __getitem__(self, name: str) -> float:
        return self.values[FEATURE_NAMES.index(name)]

    @property
    def layers(self) -> tuple[str, ...]:
        return tuple(
            layer for layer in LAYERS if self[f"cat_{layer.lower()}"] >= 0.5
        )

    def encode(self) -> dict:
        return {
            "kind": "commit_features",
            "hash": self.commit_hash,
            "features": self.as_dict(),
        }

    @classmethod
    def decode(cls, record: dict) -> "CommitFeatures":
        features = record["features"]
        missing = [n for n in FEATURE_NAMES if n not in features]
        if missing:
            raise ValueError(f"record is missing feature slots: {missing}")
        return cls(
            commit_hash=record["hash"],
            values=tuple(float(features[n]) for n in FEATURE_NAMES),
        )


def complexity_score(
    total_churn: float,
    category_count: int,
    files_changed: float,
    params: ComplexityParams = DEFAULT_COMPLEXITY,
) -> float:
    return (
        params.churn_weight * min(1.0, total_churn / params.churn_cap)
        + params.category_weight * (category_count / len(CATEGORIES))
        + params.files_weight * min(1.0, files_changed / params.files_cap)
    )


def build_feature_vector(
    commit: CommitText,
    result: CategorizationResult,
    complexity: ComplexityParams = DEFAULT_COMPLEXITY,
) -> CommitFeatures:
    affected = set(result.affected)
    total_churn = float(commit.lines_added + commit.lines_deleted)
    values: list[float] = []
    values.extend(1.0 if c in affected else 0.0 for c in CATEGORIES)
    values.extend(1.0 if result.change_type == t else 0.0 for t in CHANGE_TYPES)
    values.append(float(result.layer_count))
    values.append(float(result.component_count))
    values.append(float(commit.files_changed))
    values.append(float(commit.lines_added))
    values.append(float(commit.lines_deleted))
    values.append(total_churn)
    values.append(
        complexity_score(
            total_churn,
            result.layer_count + result.component_count,
            float(commit.files_changed),
            complexity,
        )
    )
    values.extend(1.0 if result.confidence == g else 0.0 for g in CONFIDENCE_GRADES)
    values.append(1.0 if result.refined_by_llm else 0.0)
    values.append(float(result.evidence_total))
    values.append(float(result.strong_matches))
    values.append(float(len(commit.message)))
    values.append(float(len(_MERGE_REF_RE.findall(commit.message))))
    return CommitFeatures(commit_hash=commit.hash, values=tuple(values))


# slots that are one-hot or boolean by construction; the oversampler rounds
# these after interpolation
BINARY_FEATURE_NAMES: tuple[str, ...] = (
    tuple(f"cat_{c.lower()}" for c in CATEGORIES)
    + tuple(f"type_{t}" for t in CHANGE_TYPES)
    + tuple(f"conf_{g}" for g in CONFIDENCE_GRADES)
    + ("refined_by_llm",)
)
