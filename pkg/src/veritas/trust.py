"""Node profiles, local/global trust, credibility aggregation and decisions."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .graph import SocialGraph, pearson_similarity


class Topic(enum.IntEnum):
    Pol = 0
    Tech = 1
    Movie = 2
    Research = 3


class Decision(enum.IntEnum):
    Validated = 0
    Blocked = 1


class NotNeighborsError(ValueError):
    pass


class NoValidatorsError(ValueError):
    pass


class ZeroTrustMassError(ValueError):
    pass


class IsolatedNodeError(ValueError):
    pass


# Pol/Tech/Movie follow the PEW shares for politics, sci-tech and religion;
# Research has no source figure.
DEFAULT_PREVALENCE = {
    Topic.Pol: 0.66,
    Topic.Tech: 0.68,
    Topic.Movie: 0.58,
    Topic.Research: 0.50,
}


@dataclass(frozen=True)
class NodeProfile:
    node_id: int
    interests: frozenset[Topic]
    credibility: Mapping[Topic, float]
    initial_trust: float

    def interested(self, topic: Topic) -> bool:
        return topic in self.interests


@dataclass(frozen=True)
class InfoMessage:
    message_id: int
    origin: int
    topic: Topic
    ground_truth: bool
    created_at: int
    # credibility the origin publishes with the message (its topic credibility)
    info_value: float


def _inclusion_rates(prevalence: Sequence[float]) -> list[float]:
    """Per-topic draw rates q such that, after rejecting empty interest sets,
    each topic's marginal inclusion rate is exactly its prevalence.

    Solves q_t = p_t * (1 - prod(1 - q)) by fixed-point iteration.
    """
    q = list(prevalence)
    for _ in range(200):
        p_empty = math.prod(1.0 - x for x in q)
        nxt = [p * (1.0 - p_empty) for p in prevalence]
        if max(abs(a - b) for a, b in zip(q, nxt)) < 1e-15:
            return nxt
        q = nxt
    return q


def assign_profiles(
    g: SocialGraph, topic_prevalence: Mapping[Topic, float], seed: int | str
) -> list[NodeProfile]:
    for t in Topic:
        p = topic_prevalence[t]
        if not 0 < p <= 1:
            raise ValueError(f"prevalence for {t.name} must be in (0, 1], got {p}")
    rng = random.Random(seed)
    topics = list(Topic)
    q = _inclusion_rates([topic_prevalence[t] for t in topics])
    profiles = []
    for i in range(g.node_count):
        interests: set[Topic] = set()
        while not interests:
            interests = {t for t, qt in zip(topics, q) if rng.random() < qt}
        cred = {t: rng.random() for t in topics}
        profiles.append(NodeProfile(i, frozenset(interests), cred, rng.random()))
    return profiles


@dataclass
class TrustLedger:
    """Pairwise trust state for one run.

    ``local`` caches structural (Pearson) trust for adjacent pairs, keyed by
    the sorted pair. ``global_trust[(r, s)]`` is receiver ``r``'s directed
    trust in sender ``s``; missing entries read as ``s``'s initial trust.
    """

    graph: SocialGraph
    profiles: Sequence[NodeProfile]
    local: dict[tuple[int, int], float] = field(default_factory=dict)
    global_trust: dict[tuple[int, int], float] = field(default_factory=dict)
    clamp: bool = True

    def trust(self, r: int, s: int) -> float:
        """T_{r,s}: stored global value, else local trust for neighbours,
        else the sender's initial trust."""
        v = self.global_trust.get((r, s))
        if v is not None:
            return v
        v = self.local.get((r, s) if r < s else (s, r))
        if v is not None:
            return v
        if self.graph.has_edge(r, s):
            return local_trust(self.graph, self, r, s)
        return self.profiles[s].initial_trust


def local_trust(g: SocialGraph, ledger: TrustLedger, i: int, j: int) -> float:
    key = (i, j) if i < j else (j, i)
    v = ledger.local.get(key)
    if v is None:
        if not g.has_edge(i, j):
            raise NotNeighborsError(f"{i} and {j} are not adjacent")
        v = ledger.local[key] = pearson_similarity(g, *key)
    return v


@dataclass(frozen=True)
class TrustUpdate:
    t_init: float
    # trust-weighted mean of T_{j,s} over intermediaries; 0 when none apply
    increment: float
    raw: float
    stored: float


def weighted_trust_increment(pairs: Sequence[tuple[float, float]]) -> float:
    """Σ T_rj·T_js / Σ T_rj over pairs with positive T_rj."""
    num = den = 0.0
    for t_rj, t_js in pairs:
        if t_rj > 0:
            num += t_rj * t_js
            den += t_rj
    if den <= 0:
        return 0.0
    return num / den


def _intermediary_pairs(ledger, r, s, intermediaries):
    pairs = []
    for j in intermediaries:
        if j == s:
            continue
        t_rj = ledger.trust(r, j)
        if t_rj > 0:
            pairs.append((t_rj, ledger.trust(j, s)))
    return pairs


def _apply(ledger: TrustLedger, r, s, profiles, sign: int, intermediaries) -> TrustUpdate:
    t_init = profiles[s].initial_trust
    inc = weighted_trust_increment(_intermediary_pairs(ledger, r, s, intermediaries))
    raw = t_init + inc if sign > 0 else t_init - inc
    val = min(1.0, max(0.0, raw)) if ledger.clamp else raw
    old = ledger.global_trust.get((r, s))
    if old is not None:
        # a validation never lowers trust, a block never raises it
        val = max(old, val) if sign > 0 else min(old, val)
    ledger.global_trust[(r, s)] = val
    return TrustUpdate(t_init, inc, raw, val)


def trust_update_positive(
    ledger: TrustLedger, r: int, s: int, intermediaries: Sequence[int], profiles
) -> TrustUpdate:
    """Raise receiver ``r``'s trust in sender ``s`` after a validation."""
    return _apply(ledger, r, s, profiles, +1, intermediaries)


def trust_update_negative(
    ledger: TrustLedger, r: int, s: int, intermediaries: Sequence[int], profiles
) -> TrustUpdate:
    """Lower receiver ``r``'s trust in sender ``s`` after a block."""
    return _apply(ledger, r, s, profiles, -1, intermediaries)


def weighted_credibility(weights: Sequence[float], values: Sequence[float]) -> float:
    if not weights:
        raise NoValidatorsError("empty validator set")
    den = sum(weights)
    if den <= 0:
        raise ZeroTrustMassError("validator trust weights sum to zero")
    score = sum(w * v for w, v in zip(weights, values)) / den
    # guard the [min, max] bound against rounding
    return min(max(values), max(min(values), score))


def credibility_score(
    profiles: Sequence[NodeProfile],
    ledger: TrustLedger,
    s: int,
    validators: Sequence[int],
    topic: Topic,
) -> float:
    """Trust-weighted mean of the validators' topic credibility, weighted by
    the source's trust ``T_{s,i}`` in each validator."""
    weights = [max(0.0, ledger.trust(s, i)) for i in validators]
    values = [profiles[i].credibility[topic] for i in validators]
    return weighted_credibility(weights, values)


def validation_threshold(
    g: SocialGraph, profiles: Sequence[NodeProfile], propagator: int, topic: Topic
) -> float:
    nbrs = g.neighbors(propagator)
    if not nbrs:
        raise IsolatedNodeError(f"node {propagator} has no neighbours")
    pool = [profiles[j].credibility[topic] for j in nbrs if topic in profiles[j].interests]
    if not pool:
        pool = [profiles[j].credibility[topic] for j in nbrs]
    return sum(pool) / len(pool)


def decide(score: float, threshold: float) -> Decision:
    return Decision.Validated if score > threshold else Decision.Blocked


def block_info_weight(entries: Sequence[tuple[InfoMessage, float]]) -> float:
    """Credibility-weighted information mass of one block."""
    return sum(msg.info_value * cred for msg, cred in entries)
