"""Command-line front end: ``veritas run|verify|trace|report|gen-graph``."""

from __future__ import annotations

import argparse
import configparser
import datetime as dt
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__, chain as ch, report as rp
from .graph import (
    EdgeListFile,
    EmptyGraphError,
    GraphParseError,
    SyntheticScaleFree,
    dataset_fingerprint,
    load_graph,
    write_edge_list,
)
from .sim import ConfigError, SimConfig, run_simulation
from .trust import DEFAULT_PREVALENCE, Topic

log = logging.getLogger("veritas")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3, 4


class DataError(Exception):
    pass


class UsageError(Exception):
    pass


def parse_graph_spec(spec: str, seed: int, base: Path | None = None):
    """``synthetic:n,m`` or an edge-list path (relative to ``base``)."""
    if spec.startswith("synthetic:"):
        try:
            n, m = (int(x) for x in spec[len("synthetic:"):].split(","))
            return SyntheticScaleFree(n, m, seed)
        except ValueError as e:
            raise ConfigError(f"bad synthetic graph spec {spec!r}: {e}") from None
    p = Path(spec)
    if base is not None and not p.is_absolute():
        p = base / p
    return EdgeListFile(str(p))


_INT_KEYS = ("num_seeds", "max_hops", "max_chain_len")
_BOOL_KEYS = ("clamp_trust", "oracle_credibility")


def load_config(path: str | Path, seed: int, graph_override: str | None = None) -> SimConfig:
    """Read the ``[simulation]`` section of an INI config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
        sec = cp["simulation"]
    except (configparser.Error, KeyError) as e:
        raise ConfigError(f"{path}: {e}") from None
    known = {"graph", "graph_seed", "fan_in_cap", *_INT_KEYS, *_BOOL_KEYS}
    known |= {f"prevalence_{t.name.lower()}" for t in Topic}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        graph_seed = sec.getint("graph_seed", fallback=seed)
        spec = graph_override or sec.get("graph")
        if not spec:
            raise ConfigError(f"{path}: 'graph' is required")
        kw = {k: sec.getint(k) for k in _INT_KEYS if k in sec}
        kw.update({k: sec.getboolean(k) for k in _BOOL_KEYS if k in sec})
        cap = sec.get("fan_in_cap", fallback="").strip().lower()
        prevalence = {
            t: sec.getfloat(f"prevalence_{t.name.lower()}", fallback=DEFAULT_PREVALENCE[t])
            for t in Topic
        }
        cfg = SimConfig(
            graph_source=parse_graph_spec(
                spec, graph_seed, None if graph_override else path.parent
            ),
            seed=seed,
            topic_prevalence=prevalence,
            fan_in_cap=int(cap) if cap not in ("", "none") else None,
            **kw,
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{path}: {e}") from None
    cfg.validate()
    return cfg


def _paths(out: Path) -> dict[str, Path]:
    stem = out.with_suffix("") if out.suffix == ".json" else out
    return {
        "report": out,
        "chains": Path(f"{stem}.chains.ndjson"),
        "manifest": Path(f"{stem}.manifest.json"),
        "prefix": stem,
    }


def execute_run(cfg: SimConfig, out: Path) -> dict:
    """Run one simulation and write report, chains, manifest and tables."""
    try:
        graph = load_graph(cfg.graph_source)
    except (GraphParseError, EmptyGraphError, FileNotFoundError) as e:
        raise DataError(str(e)) from None
    fp = dataset_fingerprint(cfg.graph_source, graph)
    report = run_simulation(cfg, graph=graph)
    report.dataset_fingerprint = fp
    paths = _paths(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    paths["report"].write_text(rp.dumps(report))
    paths["chains"].write_text(ch.export_chains(report.chains))
    manifest = {
        "config": rp.config_to_dict(cfg),
        "tool_version": __version__,
        "started_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "root_seed": cfg.seed,
        "dataset_fingerprint": fp,
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=1) + "\n")
    rp.write_tables(report, paths["prefix"])
    return {"out": str(out), "seed": cfg.seed, "accuracy": report.accuracy,
            "baseline_accuracy": report.baseline_accuracy}


def _load_manifest(path: str) -> SimConfig:
    try:
        m = json.loads(Path(path).read_text())
        cfg = rp.config_from_dict(m["config"])
        expected = m["dataset_fingerprint"]
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {path}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"bad manifest {path}: {e!r}") from None
    if m.get("root_seed") != cfg.seed:
        raise ConfigError("manifest root_seed does not match its config")
    try:
        actual = dataset_fingerprint(cfg.graph_source)
    except (GraphParseError, EmptyGraphError, FileNotFoundError) as e:
        raise DataError(str(e)) from None
    if actual != expected:
        raise DataError(f"dataset fingerprint mismatch: {actual} != {expected}")
    return cfg


def cmd_run(args) -> int:
    if args.manifest:
        cfg = _load_manifest(args.manifest)
    else:
        if args.config is None:
            raise UsageError("run needs --config (or --manifest)")
        if args.seed is None:
            raise UsageError("run needs --seed; there is no default seed")
        cfg = load_config(args.config, args.seed, args.graph)
    out = Path(args.out)
    if args.runs == 1:
        res = execute_run(cfg, out)
        print(f"accuracy {res['accuracy']:.4f} (always-T baseline "
              f"{res['baseline_accuracy']:.4f}) -> {out}")
        return EXIT_OK
    stem = out.with_suffix("") if out.suffix == ".json" else out
    jobs = [(replace(cfg, seed=cfg.seed + k), Path(f"{stem}-run{k:03d}.json"))
            for k in range(args.runs)]
    workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(execute_run, *zip(*jobs)))
    else:
        results = [execute_run(c, o) for c, o in jobs]
    summary = {
        "runs": results,
        "mean_accuracy": sum(r["accuracy"] for r in results) / len(results),
    }
    Path(f"{stem}-summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    for r in results:
        print(f"seed {r['seed']}: accuracy {r['accuracy']:.4f}")
    print(f"mean accuracy {summary['mean_accuracy']:.4f}")
    return EXIT_OK


def _read_chains(path: str) -> dict[int, ch.Chain]:
    try:
        text = Path(path).read_bytes().decode("utf-8")
        return ch.import_chains(text)
    except FileNotFoundError:
        raise DataError(f"chain export not found: {path}") from None
    except (UnicodeDecodeError, ch.ExportFormatError) as e:
        raise DataError(f"{path}: {e}") from None


def cmd_verify(args) -> int:
    chains = _read_chains(args.chains)
    bad = []
    for origin, c in sorted(chains.items()):
        check = ch.verify_chain(c)
        if check.valid:
            check = ch.check_origin(origin, c)
        if not check.valid:
            bad.append(f"chain of node {origin}: {check}")
        elif not ch.provenance_consistent(c):
            bad.append(f"chain of node {origin}: provenance hash mismatch")
    if bad:
        for line in bad:
            print(line, file=sys.stderr)
        return EXIT_DATA
    print(f"all chains valid ({len(chains)} chains)")
    return EXIT_OK


def cmd_trace(args) -> int:
    chains = _read_chains(args.chains)
    for origin, c in sorted(chains.items()):
        try:
            found = ch.trace_source(c, args.message)
        except ch.MessageNotFound:
            continue
        except ch.TamperedProvenance as e:
            raise DataError(str(e)) from None
        print(found)
        return EXIT_OK
    raise DataError(f"message {args.message} not found in {args.chains}")


def cmd_report(args) -> int:
    try:
        report = rp.load(args.report)
    except FileNotFoundError:
        raise DataError(f"report not found: {args.report}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise DataError(f"bad report {args.report}: {e!r}") from None
    if args.out:
        rp.write_tables(report, args.out)
    sys.stdout.write(rp.render_tables(report))
    return EXIT_OK


def cmd_gen_graph(args) -> int:
    if args.seed is None:
        raise UsageError("gen-graph needs --seed")
    src = parse_graph_spec(args.graph, args.seed)
    if not isinstance(src, SyntheticScaleFree):
        raise UsageError("gen-graph needs --graph synthetic:n,m")
    g = load_graph(src)
    write_edge_list(g, args.out, header=f"scale-free n={src.n} m={src.m} seed={src.seed}")
    print(f"{g.node_count} nodes, {len(g.edges)} edges -> {args.out}")
    return EXIT_OK


def _u64(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="veritas", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation and write its report")
    r.add_argument("--config")
    r.add_argument("--seed", type=_u64)
    r.add_argument("--out", required=True)
    r.add_argument("--graph", help="PATH or synthetic:n,m (overrides the config)")
    r.add_argument("--runs", type=_positive, default=1)
    r.add_argument("--manifest", help="replay a run manifest")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="re-validate exported chains")
    v.add_argument("--chains", required=True)
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("trace", help="find the origin of a message")
    t.add_argument("--chains", required=True)
    t.add_argument("--message", type=int, required=True)
    t.set_defaults(func=cmd_trace)

    rep = sub.add_parser("report", help="re-render tables from a saved report")
    rep.add_argument("--report", required=True)
    rep.add_argument("--out", help="prefix for .tables.txt/.csv outputs")
    rep.set_defaults(func=cmd_report)

    gg = sub.add_parser("gen-graph", help="write a synthetic scale-free edge list")
    gg.add_argument("--graph", required=True)
    gg.add_argument("--seed", type=_u64)
    gg.add_argument("--out", required=True)
    gg.set_defaults(func=cmd_gen_graph)
    return p


def main(argv=None) -> int:
    level = os.environ.get("VERITAS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"veritas: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"veritas: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"veritas: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
