"""Experiment runner and offline tools.

Subcommands:

* run      execute one scenario or a sweep, writing a metrics CSV, commit
           logs, per-round records, and a human-readable summary
* verify   audit a `.frag` file offline and print the verdict
* compare  align two metrics CSVs and print ratio columns

Exit codes: 0 success / accept, 1 verification reject, 2 configuration or
parse problems, 3 fairness violations detected, 4 safety invariant broken.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .errors import AutigError, ConfigError, ParseError, SchemaMismatch
from .crypto import MAC_SCHEME
from .fragments import decode_fragment
from .params import derive_thresholds
from .simnet import PROTOCOLS, RunResult, Scenario, run_record_jsonl, run_scenario
from .verify import verify_fragment

CSV_COLUMNS = [
    "scenario_id",
    "protocol",
    "n",
    "f",
    "gamma",
    "tx_rate",
    "lo_size",
    "lo_interval_ms",
    "seed",
    "committed_tps",
    "p50_latency_ms",
    "p99_latency_ms",
    "mean_btf",
    "max_btf",
    "mean_proof_bytes",
    "leader_ops",
    "follower_ops",
    "violations",
    "handoffs",
]

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_CONFIG = 2
EXIT_FAIRNESS = 3
EXIT_SAFETY = 4

_SCENARIO_FIELDS = {
    "scenario_id": str,
    "protocol": str,
    "n": int,
    "f": int,
    "gamma": float,
    "strict_bound": None,  # parsed as bool
    "tx_rate": float,
    "lo_size": int,
    "lo_interval_ms": float,
    "duration_ms": float,
    "seed": int,
    "gst_ms": float,
    "delta_ms": float,
    "arrival_jitter_ms": float,
    "prune_horizon": None,  # int or "none"
    "resubmit_fraction": float,
    "drain_max_rounds": int,
    "junk_order_size": int,
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_byzantine(text: str):
    if not text.strip():
        return ()
    out = []
    for part in text.split(","):
        idx, _, behavior = part.strip().partition("=")
        if not behavior:
            raise ConfigError(f"byzantine entries look like index=behavior, got {part!r}")
        out.append((int(idx), behavior.strip()))
    return tuple(out)


def load_config(path: str) -> dict:
    """key = value lines; # starts a comment; keys mirror scenario fields."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        values[key.strip()] = val.strip()
    return values


def _scenario_from(values: dict) -> Scenario:
    kwargs = {}
    for key, val in values.items():
        if key == "byzantine":
            kwargs[key] = _parse_byzantine(val) if isinstance(val, str) else val
        elif key == "leader_mutation":
            if isinstance(val, str):
                if val.lower() in ("", "none"):
                    kwargs[key] = None
                else:
                    round_txt, _, cls = val.partition(":")
                    kwargs[key] = (int(round_txt), cls)
            else:
                kwargs[key] = val
        elif key == "strict_bound":
            kwargs[key] = _parse_bool(val) if isinstance(val, str) else val
        elif key == "prune_horizon":
            if isinstance(val, str):
                kwargs[key] = None if val.lower() in ("none", "off") else int(val)
            else:
                kwargs[key] = val
        elif key in _SCENARIO_FIELDS:
            conv = _SCENARIO_FIELDS[key]
            kwargs[key] = conv(val) if (conv and isinstance(val, str)) else val
        else:
            raise ConfigError(f"unknown scenario key {key!r}")
    try:
        sc = Scenario(**kwargs)
        sc.validate()
        derive_thresholds(sc.params())
    except ConfigError:
        raise
    except AutigError as exc:
        raise ConfigError(str(exc)) from exc
    return sc


def csv_row(result: RunResult) -> list[str]:
    sc = result.scenario
    head = [
        sc.scenario_id,
        sc.protocol,
        str(sc.n),
        str(sc.f),
        str(sc.gamma),
        str(sc.tx_rate),
        str(sc.lo_size),
        str(sc.lo_interval_ms),
        str(sc.seed),
    ]
    return head + result.metrics.csv_values()


def results_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for res in results:
        writer.writerow(csv_row(res))
    return buf.getvalue()


def _summary(result: RunResult) -> str:
    sc = result.scenario
    m = result.metrics
    lines = [
        f"scenario {sc.scenario_id} protocol={sc.protocol} seed={sc.seed}",
        f"  n={sc.n} f={sc.f} gamma={sc.gamma} tx_rate={sc.tx_rate} "
        f"lo_size={sc.lo_size} lo_interval={sc.lo_interval_ms}ms",
        f"  committed={m.committed_count} tps={m.committed_tps:.1f} "
        f"p50={m.p50_latency_ms:.0f}ms p99={m.p99_latency_ms:.0f}ms",
        f"  btf mean={m.mean_btf:.2f} max={m.max_btf} "
        f"proof_bytes={m.mean_proof_bytes:.0f} leader_ops={m.leader_ops} "
        f"follower_ops={m.follower_ops}",
        f"  violations={m.violations} handoffs={m.handoffs} "
        f"safety={'ok' if result.safety_ok else 'BROKEN'} "
        f"uncommitted_eligible={result.uncommitted_eligible}",
    ]
    return "\n".join(lines)


def cmd_run(args) -> int:
    base: dict = {}
    if args.config:
        base.update(load_config(args.config))
    override_keys = [
        ("scenario_id", args.scenario_id),
        ("n", args.n),
        ("f", args.f),
        ("gamma", args.gamma),
        ("strict_bound", args.strict_bound),
        ("tx_rate", args.tx_rate),
        ("lo_interval_ms", args.lo_interval),
        ("duration_ms", args.duration),
        ("gst_ms", args.gst),
        ("delta_ms", args.delta),
        ("arrival_jitter_ms", args.arrival_jitter),
        ("byzantine", args.byzantine),
        ("leader_mutation", args.leader_mutation),
        ("prune_horizon", args.prune_horizon),
        ("resubmit_fraction", args.resubmit_fraction),
        ("junk_order_size", args.junk_order_size),
    ]
    for key, val in override_keys:
        if val is not None:
            base[key] = val

    protocols = (args.protocol or base.get("protocol", "autig")).split(",")
    lo_sizes = [int(x) for x in str(args.lo_size or base.get("lo_size", 50)).split(",")]
    seeds = [int(x) for x in str(args.seed or base.get("seed", 0)).split(",")]
    base.pop("protocol", None)
    base.pop("lo_size", None)
    base.pop("seed", None)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results: list[RunResult] = []
    worst = EXIT_OK
    for protocol in protocols:
        for lo_size in lo_sizes:
            for seed in seeds:
                values = dict(base)
                values["protocol"] = protocol.strip()
                values["lo_size"] = lo_size
                values["seed"] = seed
                sid = values.get("scenario_id", "run")
                values["scenario_id"] = f"{sid}-{protocol.strip()}-lo{lo_size}-s{seed}"
                sc = _scenario_from(values)
                result = run_scenario(sc)
                results.append(result)
                stem = out_dir / sc.scenario_id
                stem.with_suffix(".commits.txt").write_text(result.commit_log)
                stem.with_suffix(".rounds.jsonl").write_text(run_record_jsonl(result))
                print(_summary(result))
                if not result.safety_ok:
                    worst = max(worst, EXIT_SAFETY)
                elif result.metrics.violations:
                    worst = max(worst, EXIT_FAIRNESS)

    (out_dir / "metrics.csv").write_text(results_csv(results))
    print(f"wrote {out_dir / 'metrics.csv'} ({len(results)} rows)")
    return worst


def cmd_verify(args) -> int:
    try:
        frag = decode_fragment(Path(args.fragment).read_bytes())
    except ParseError as exc:
        print(f"parse error: {exc}")
        return EXIT_CONFIG
    from .params import ProtocolParams

    params = ProtocolParams(
        n=args.n, f=args.f, gamma=args.gamma, strict_bound=args.strict_bound
    )
    try:
        th = derive_thresholds(params)
    except AutigError as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG
    code = verify_fragment(frag, params, th, MAC_SCHEME)
    if code is None:
        print("accept")
        return EXIT_OK
    print(f"reject {code.value}")
    return EXIT_REJECT


def _read_csv(path: str) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)


def cmd_compare(args) -> int:
    try:
        header_a, rows_a = _read_csv(args.left)
        header_b, rows_b = _read_csv(args.right)
        if header_a != header_b or header_a != CSV_COLUMNS:
            raise SchemaMismatch("metrics files do not share the expected schema")
        if len(rows_a) != len(rows_b):
            raise SchemaMismatch("metrics files have different row counts")
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}")
        return EXIT_CONFIG

    def ratio(a: str, b: str) -> float:
        den = float(b)
        return float(a) / den if den else float("inf")

    print(
        f"{'scenario':30s} {'tps_ratio':>10s} {'p50_ratio':>10s} "
        f"{'follower_op_ratio':>18s} flags"
    )
    for ra, rb in zip(rows_a, rows_b):
        tps = ratio(ra["committed_tps"], rb["committed_tps"])
        lat = ratio(ra["p50_latency_ms"], rb["p50_latency_ms"])
        ops = ratio(ra["follower_ops"], rb["follower_ops"])
        flags = []
        if tps < 1.0:
            flags.append("tps<1")
        if lat > 1.0:
            flags.append("lat>1")
        print(
            f"{ra['scenario_id']:30s} {tps:10.3f} {lat:10.3f} {ops:18.3f} "
            f"{','.join(flags) or 'ok'}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autig", description="fair-ordering experiments and fragment tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute scenarios and write metrics")
    run_p.add_argument("--config", help="key = value scenario file")
    run_p.add_argument("--scenario-id")
    run_p.add_argument("--protocol", help=f"comma list from {', '.join(PROTOCOLS)}")
    run_p.add_argument("--n", type=int)
    run_p.add_argument("--f", type=int)
    run_p.add_argument("--gamma", type=float)
    run_p.add_argument("--strict-bound", dest="strict_bound", type=_parse_bool)
    run_p.add_argument("--tx-rate", type=float)
    run_p.add_argument("--lo-size", help="comma list sweeps")
    run_p.add_argument("--lo-interval", type=float, help="milliseconds")
    run_p.add_argument("--duration", type=float, help="milliseconds")
    run_p.add_argument("--seed", help="comma list sweeps")
    run_p.add_argument("--gst", type=float)
    run_p.add_argument("--delta", type=float)
    run_p.add_argument("--arrival-jitter", type=float)
    run_p.add_argument("--byzantine", help="e.g. 1=lie_reverse,2=silent")
    run_p.add_argument("--leader-mutation", help="round:class, e.g. 5:flip_state")
    run_p.add_argument("--prune-horizon", help="integer or 'none'")
    run_p.add_argument("--resubmit-fraction", type=float)
    run_p.add_argument("--junk-order-size", type=int)
    run_p.add_argument("--out-dir", default="out")
    run_p.set_defaults(fn=cmd_run)

    ver_p = sub.add_parser("verify", help="audit a .frag file")
    ver_p.add_argument("fragment")
    ver_p.add_argument("--n", type=int, default=5)
    ver_p.add_argument("--f", type=int, default=1)
    ver_p.add_argument("--gamma", type=float, default=1.0)
    ver_p.add_argument("--strict-bound", dest="strict_bound", type=_parse_bool, default=True)
    ver_p.set_defaults(fn=cmd_verify)

    cmp_p = sub.add_parser("compare", help="ratio table of two metrics CSVs")
    cmp_p.add_argument("left")
    cmp_p.add_argument("right")
    cmp_p.set_defaults(fn=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "leader_mutation", None):
        round_txt, _, cls = args.leader_mutation.partition(":")
        args.leader_mutation = (int(round_txt), cls)
    if getattr(args, "prune_horizon", None) is not None:
        args.prune_horizon = (
            None if args.prune_horizon.lower() in ("none", "off") else int(args.prune_horizon)
        )
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
