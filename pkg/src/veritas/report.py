"""Run report serialisation and the message / detection-level tables."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from . import __version__
from .graph import EdgeListFile, SyntheticScaleFree
from .sim import (
    HopRecord,
    PropagationEvent,
    RunReport,
    SimConfig,
    detection_level_stats,
    table_level,
)
from .trust import Decision, InfoMessage, Topic


def config_to_dict(cfg: SimConfig) -> dict:
    src = cfg.graph_source
    if isinstance(src, SyntheticScaleFree):
        graph = {"kind": "synthetic", "n": src.n, "m": src.m, "seed": src.seed}
    else:
        graph = {"kind": "file", "path": str(src.path)}
    return {
        "graph": graph,
        "seed": cfg.seed,
        "num_seeds": cfg.num_seeds,
        "max_hops": cfg.max_hops,
        "max_chain_len": cfg.max_chain_len,
        "topic_prevalence": {t.name: cfg.topic_prevalence[t] for t in Topic},
        "fan_in_cap": cfg.fan_in_cap,
        "clamp_trust": cfg.clamp_trust,
        "oracle_credibility": cfg.oracle_credibility,
    }


def config_from_dict(d: dict) -> SimConfig:
    g = d["graph"]
    if g["kind"] == "synthetic":
        src = SyntheticScaleFree(g["n"], g["m"], g["seed"])
    else:
        src = EdgeListFile(g["path"])
    return SimConfig(
        graph_source=src,
        seed=d["seed"],
        num_seeds=d["num_seeds"],
        max_hops=d["max_hops"],
        max_chain_len=d["max_chain_len"],
        topic_prevalence={Topic[k]: v for k, v in d["topic_prevalence"].items()},
        fan_in_cap=d["fan_in_cap"],
        clamp_trust=d["clamp_trust"],
        oracle_credibility=d["oracle_credibility"],
    )


def _label(b: bool) -> str:
    return "T" if b else "F"


def _event_to_dict(e: PropagationEvent) -> dict:
    m = e.message
    return {
        "message_id": m.message_id,
        "origin": m.origin,
        "topic": m.topic.name,
        "ground_truth": _label(m.ground_truth),
        "info_value": m.info_value,
        "created_at": m.created_at,
        "final_label": _label(e.final_label),
        "detection_level": e.detection_level,
        "reached": e.reached,
        "hops": [
            {
                "hop": h.hop,
                "receivers": h.receivers,
                "validators": list(h.validators),
                "score": h.score,
                "threshold": h.threshold,
                "decision": h.decision.name,
                "raw_trust_min": h.raw_trust_min,
                "raw_trust_max": h.raw_trust_max,
            }
            for h in e.hops
        ],
        "diagnostics": list(e.diagnostics),
    }


def _event_from_dict(d: dict) -> PropagationEvent:
    msg = InfoMessage(
        d["message_id"], d["origin"], Topic[d["topic"]], d["ground_truth"] == "T",
        d["created_at"], d["info_value"],
    )
    hops = [
        HopRecord(h["hop"], h["receivers"], tuple(h["validators"]), h["score"],
                  h["threshold"], Decision[h["decision"]], h["raw_trust_min"],
                  h["raw_trust_max"])
        for h in d["hops"]
    ]
    return PropagationEvent(
        msg, hops, d["final_label"] == "T", d["detection_level"], d["reached"],
        list(d["diagnostics"]),
    )


def report_to_dict(report: RunReport) -> dict:
    stats = detection_level_stats(report)
    return {
        "tool_version": __version__,
        "config": config_to_dict(report.config),
        "dataset_fingerprint": report.dataset_fingerprint,
        "accuracy": report.accuracy,
        "baseline_accuracy": report.baseline_accuracy,
        "topic_counts": {t.name: c for t, c in report.topic_counts().items()},
        "detection_levels": {
            t.name: {"mean": v, "table": table_level(v)} for t, v in stats.items()
        },
        "level_histogram": {t.name: h for t, h in report.level_histogram().items()},
        "chain_heads": {
            str(o): c.head.block_hash.hex() for o, c in sorted(report.chains.items())
        },
        "chain_lengths": {str(o): len(c) for o, c in sorted(report.chains.items())},
        "events": [_event_to_dict(e) for e in report.events],
        "node_ids": list(report.node_ids) if report.node_ids is not None else None,
    }


def report_from_dict(d: dict) -> RunReport:
    ids = d.get("node_ids")
    return RunReport(
        config_from_dict(d["config"]),
        [_event_from_dict(e) for e in d["events"]],
        {},
        d.get("dataset_fingerprint", ""),
        tuple(ids) if ids is not None else None,
    )


def dumps(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), separators=(",", ":")) + "\n"


def load(path: str | Path) -> RunReport:
    with open(path) as fh:
        return report_from_dict(json.load(fh))


# -- tables -----------------------------------------------------------------


def message_rows(report: RunReport) -> list[tuple[int, str, str]]:
    return [
        (e.message.origin, e.message.topic.name, _label(e.final_label))
        for e in report.events
    ]


def detection_rows(report: RunReport) -> tuple[list[tuple[str, int]], list[str]]:
    """Rows in the published table's topic order, plus names of topics with no events."""
    order = [Topic.Pol, Topic.Tech, Topic.Research, Topic.Movie]
    present = {e.message.topic for e in report.events}
    stats = detection_level_stats(report, [t for t in order if t in present])
    rows = [(t.name, table_level(stats[t])) for t in order if t in stats]
    return rows, [t.name for t in order if t not in present]


def render_tables(report: RunReport) -> str:
    out = io.StringIO()
    out.write(f"{'Node ID':>8}  {'Info Type':<9}  Detection\n")
    for node, topic, label in message_rows(report):
        out.write(f"{node:>8}  {topic:<9}  {label}\n")
    out.write("\n")
    rows, missing = detection_rows(report)
    out.write(f"{'Info Type':<9}  Average Level of Detection\n")
    for topic, level in rows:
        out.write(f"{topic:<9}  {level}\n")
    for name in missing:
        out.write(f"* {name}: no messages generated, omitted\n")
    return out.getvalue()


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def table_files(report: RunReport) -> dict[str, str]:
    """Suffix -> file content for every table and plot-data sidecar."""
    rows, _ = detection_rows(report)
    counts = report.topic_counts()
    hist = report.level_histogram()
    return {
        ".tables.txt": render_tables(report),
        ".messages.csv": _csv(["node_id", "info_type", "detection"], message_rows(report)),
        ".detection.csv": _csv(["info_type", "avg_detection_level"], rows),
        ".fig2.csv": _csv(
            ["info_type", "messages", "detected_T", "detected_F", "truly_T", "correct"],
            [
                (t.name, c["messages"], c["detected_T"], c["detected_F"],
                 c["truly_T"], c["correct"])
                for t, c in counts.items()
            ],
        ),
        ".fig3.csv": _csv(
            ["info_type", "level", "messages"],
            [(t.name, lvl, n) for t, h in hist.items() for lvl, n in enumerate(h, 1)],
        ),
    }


def write_tables(report: RunReport, prefix: str | Path) -> list[Path]:
    written = []
    for suffix, text in table_files(report).items():
        p = Path(f"{prefix}{suffix}")
        p.write_text(text)
        written.append(p)
    return written
