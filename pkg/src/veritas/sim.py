"""Hop-by-hop propagation of seeded messages with per-hop validation."""

from __future__ import annotations

import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import chain as ch
from .graph import GraphSource, SocialGraph, SyntheticScaleFree, load_graph
from .trust import (
    DEFAULT_PREVALENCE,
    Decision,
    InfoMessage,
    NodeProfile,
    Topic,
    TrustLedger,
    ZeroTrustMassError,
    assign_profiles,
    block_info_weight,
    decide,
    local_trust,
    trust_update_negative,
    trust_update_positive,
    validation_threshold,
    weighted_credibility,
)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class EmptyTopicError(LookupError):
    pass


@dataclass(frozen=True)
class SimConfig:
    graph_source: GraphSource
    seed: int
    num_seeds: int = 100
    max_hops: int = 6
    max_chain_len: int = ch.DEFAULT_MAX_LEN
    topic_prevalence: Mapping[Topic, float] = field(
        default_factory=lambda: dict(DEFAULT_PREVALENCE)
    )
    fan_in_cap: int | None = None
    clamp_trust: bool = True
    # replace each message's published credibility by its ground truth (1/0)
    oracle_credibility: bool = False

    def validate(self) -> None:
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be positive")
        if self.max_hops < 1:
            raise ConfigError("max_hops must be >= 1")
        if self.max_chain_len < 1:
            raise ConfigError("max_chain_len must be positive")
        if self.fan_in_cap is not None and self.fan_in_cap < 1:
            raise ConfigError("fan_in_cap must be positive when set")
        if set(self.topic_prevalence) != set(Topic):
            raise ConfigError("topic_prevalence needs one entry per topic")
        for t, p in self.topic_prevalence.items():
            if not 0 < p <= 1:
                raise ConfigError(f"prevalence for {t.name} must be in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


def substream(seed: int, name: str) -> random.Random:
    """Named, independently replayable RNG stream under a root seed."""
    return random.Random(f"{seed}/{name}")


@dataclass(frozen=True)
class HopRecord:
    hop: int
    receivers: int
    validators: tuple[int, ...]
    score: float
    threshold: float
    decision: Decision
    # unclamped trust updates applied to this hop's receivers
    raw_trust_min: float
    raw_trust_max: float


@dataclass
class PropagationEvent:
    message: InfoMessage
    hops: list[HopRecord]
    final_label: bool
    detection_level: int
    reached: int = 0
    diagnostics: list[str] = field(default_factory=list)

    @property
    def correct(self) -> bool:
        return self.final_label == self.message.ground_truth


@dataclass
class RunReport:
    config: SimConfig
    events: list[PropagationEvent]
    chains: dict[int, ch.Chain]
    dataset_fingerprint: str = ""
    node_ids: tuple[int, ...] | None = None

    @property
    def accuracy(self) -> float:
        return accuracy(self)

    @property
    def baseline_accuracy(self) -> float:
        """Accuracy of labelling every message as true."""
        return sum(e.message.ground_truth for e in self.events) / len(self.events)

    def topic_counts(self) -> dict[Topic, dict[str, int]]:
        out = {}
        for t in Topic:
            evs = [e for e in self.events if e.message.topic == t]
            out[t] = {
                "messages": len(evs),
                "detected_T": sum(e.final_label for e in evs),
                "detected_F": sum(not e.final_label for e in evs),
                "truly_T": sum(e.message.ground_truth for e in evs),
                "correct": sum(e.correct for e in evs),
            }
        return out

    def level_histogram(self) -> dict[Topic, list[int]]:
        hops = self.config.max_hops
        out = {}
        for t in Topic:
            c = Counter(e.detection_level for e in self.events if e.message.topic == t)
            out[t] = [c.get(h, 0) for h in range(1, hops + 1)]
        return out


def accuracy(report: RunReport) -> float:
    if not report.events:
        raise ValueError("report has no events")
    return sum(e.correct for e in report.events) / len(report.events)


def detection_level_stats(
    report: RunReport, topics: Sequence[Topic] | None = None
) -> dict[Topic, float]:
    """Mean detection level per topic (raw, unrounded)."""
    if topics is None:
        topics = [t for t in Topic if any(e.message.topic == t for e in report.events)]
    out = {}
    for t in topics:
        levels = [e.detection_level for e in report.events if e.message.topic == t]
        if not levels:
            raise EmptyTopicError(f"no events for topic {t.name}")
        out[t] = sum(levels) / len(levels)
    return out


def table_level(mean: float) -> int:
    """Round half up, as shown in the detection-level table."""
    return math.floor(mean + 0.5)


def generate_messages(
    g: SocialGraph, profiles: Sequence[NodeProfile], config: SimConfig
) -> list[InfoMessage]:
    rng = substream(config.seed, "messages")
    eligible = [i for i in range(g.node_count) if g.degree(i) > 0]
    if config.num_seeds > len(eligible):
        raise ConfigError(
            f"num_seeds={config.num_seeds} exceeds {len(eligible)} non-isolated nodes"
        )
    origins = rng.sample(eligible, config.num_seeds)
    msgs = []
    for k, o in enumerate(origins, 1):
        topic = rng.choice(sorted(profiles[o].interests))
        cred = profiles[o].credibility[topic]
        truth = rng.random() < cred
        value = (1.0 if truth else 0.0) if config.oracle_credibility else cred
        msgs.append(InfoMessage(k, o, topic, truth, 0, value))
    return msgs


class _Propagation:
    def __init__(self, g, profiles, ledger, config):
        self.g = g
        self.profiles = profiles
        self.ledger = ledger
        self.config = config
        self._interested = {
            t: frozenset(p.node_id for p in profiles if t in p.interests) for t in Topic
        }
        self._thresholds: dict[tuple[int, Topic], float] = {}

    def interested(self, node, topic):
        return node in self._interested[topic]

    def threshold(self, r, topic):
        key = (r, topic)
        v = self._thresholds.get(key)
        if v is None:
            v = self._thresholds[key] = validation_threshold(
                self.g, self.profiles, r, topic
            )
        return v

    def validators_for(self, r, msg):
        pool = self._interested[msg.topic]
        cands = [v for v in self.g.neighbors(r) if v != msg.origin and v in pool]
        cap = self.config.fan_in_cap
        if cap is not None and len(cands) > cap:
            lt = {v: local_trust(self.g, self.ledger, r, v) for v in cands}
            cands.sort(key=lambda v: (-lt[v], v))
            cands = cands[:cap]
        return cands

    def run(self, msg: InfoMessage) -> tuple[PropagationEvent, ch.Chain]:
        g, profiles, cfg = self.g, self.profiles, self.config
        origin, topic = msg.origin, msg.topic
        chain = ch.Chain(max_len=cfg.max_chain_len)
        diags: list[str] = []

        published = dict(profiles[origin].credibility)
        published[topic] = msg.info_value
        np_ = ch.NodeProperty(origin, published, topic)
        gen = np_.hash()

        first = [q for q in g.neighbors(origin) if self.interested(q, topic)]
        lt0 = (
            sum(local_trust(g, self.ledger, origin, q) for q in first) / len(first)
            if first else 0.0
        )
        simd = ch.SIMD(np_, ch.NodeService(msg.message_id, topic, origin, lt0), gen)
        self.record(chain, [simd], msg.created_at, [(msg, msg.info_value)], diags)

        visited = {origin}
        frontier = [origin]
        hops: list[HopRecord] = []
        label, level = True, cfg.max_hops
        for h in range(1, cfg.max_hops + 1):
            receivers = []
            topical = self._interested[topic]
            for p in frontier:
                for q in g.neighbors(p):
                    if q in topical and q not in visited:
                        visited.add(q)
                        receivers.append(q)
            if not receivers and h == 1:
                # no interested neighbour: the whole neighbourhood judges
                receivers = list(g.neighbors(origin))
                visited.update(receivers)
                diags.append("origin has no interested neighbour")
            if not receivers:
                # nobody left to ask: the message was never refuted
                diags.append(f"cascade exhausted before hop {h}")
                break

            pool: set[int] = set()
            for r in receivers:
                pool.update(self.validators_for(r, msg))
            validators = sorted(pool) if pool else sorted(receivers)

            # each validator reports the credibility the origin published
            weights = [max(0.0, self.ledger.trust(origin, i)) for i in validators]
            values = [msg.info_value] * len(validators)
            try:
                score = weighted_credibility(weights, values)
            except ZeroTrustMassError:
                diags.append(f"hop {h}: zero trust mass, unweighted mean used")
                score = sum(values) / len(values)

            threshold = sum(self.threshold(r, topic) for r in receivers) / len(receivers)
            decision = decide(score, threshold)

            update = (
                trust_update_positive if decision is Decision.Validated
                else trust_update_negative
            )
            raws = [
                update(self.ledger, r, origin, g.neighbors(r), profiles).raw
                for r in receivers
            ]
            hops.append(
                HopRecord(h, len(receivers), tuple(validators), score, threshold,
                          decision, min(raws), max(raws))
            )

            digests: list = [
                ch.VerificationMD(msg.message_id, receivers[0], decision, score, gen),
                ch.MinerMD(chain.head.block_hash, gen),
            ]
            if decision is Decision.Blocked:
                refreshed = dict(published)
                refreshed[topic] = score
                digests.append(ch.BlockingMD(msg.message_id, origin, refreshed, gen))
            self.record(chain, digests, msg.created_at + h, [(msg, score)], diags)

            if decision is Decision.Blocked:
                label, level = False, h
                break
            frontier = receivers

        event = PropagationEvent(msg, hops, label, level, len(visited) - 1, diags)
        return event, chain

    @staticmethod
    def record(chain, digests, tick, entries, diags):
        if len(chain) >= chain.max_len:
            diags.append(f"chain full, block at tick {tick} not recorded")
            return
        ch.append_block(chain, digests, tick, block_info_weight(entries))


def run_simulation(
    config: SimConfig,
    graph: SocialGraph | None = None,
    profiles: Sequence[NodeProfile] | None = None,
) -> RunReport:
    """Run one seeded experiment. ``graph``/``profiles`` may be passed in to
    reuse an already loaded graph or to inject hand-built profiles."""
    config.validate()
    g = graph if graph is not None else load_graph(config.graph_source)
    if profiles is None:
        profiles = assign_profiles(
            g, config.topic_prevalence, f"{config.seed}/profiles"
        )
    ledger = TrustLedger(g, profiles, clamp=config.clamp_trust)
    prop = _Propagation(g, profiles, ledger, config)
    events, chains = [], {}
    for msg in generate_messages(g, profiles, config):
        try:
            ev, c = prop.run(msg)
        except Exception as e:  # keep the run going, report the message
            log.exception("message %d failed", msg.message_id)
            ev = PropagationEvent(msg, [], False, 1, 0, [f"error: {e!r}"])
            c = ch.Chain(max_len=config.max_chain_len)
        events.append(ev)
        chains[msg.origin] = c
    return RunReport(config, events, chains, node_ids=g.external_ids)


def synthetic(n: int, m: int, seed: int) -> SyntheticScaleFree:
    return SyntheticScaleFree(n, m, seed)
