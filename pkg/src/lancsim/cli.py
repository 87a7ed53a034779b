"""Command-line front end: single runs, parameter sweeps, and the encoding
throughput benchmark.

    lancsim run   --config cfg.txt --seed 3 --out results/
    lancsim sweep --config cfg.txt --param avg_degree --values 6,10,14 \
                  --seeds 1,2,3 --out sweep_out/
    lancsim bench --k 65536 --n 1600 --m 20 --seconds 2

Config files are flat key=value lines; every key has a default, so an empty
file runs the standard 1000-peer static setting. All randomness comes from
the seed: repeating an invocation reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics, netmodel, rlnc, sim_engine
from .policies import PolicyVariant
from .rlnc import FileSpec
from .sim_engine import SimConfig


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


CONFIG_KEYS = (
    "peers",
    "blocks",
    "block_size",
    "avg_degree",
    "intra_fraction",
    "deploy_fraction",
    "server_locality",
    "policy",
    "encoding_density",
    "capacity_up",
    "capacity_down",
    "hetero_fraction",
    "hetero_multiplier",
    "tft_threshold",
    "scenario",
    "underlay",
    "server_as",
    "seed",
)

SWEEPABLE = tuple(k for k in CONFIG_KEYS if k not in ("underlay", "seed"))


def _parse_bool(raw: str, key: str) -> bool:
    val = raw.strip().lower()
    if val in ("true", "1", "yes"):
        return True
    if val in ("false", "0", "no"):
        return False
    raise ValidationError(f"{key}: expected a boolean, got {raw!r}")


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in ("peers", "blocks", "block_size", "avg_degree", "capacity_up",
                   "capacity_down", "server_as", "seed"):
            return int(raw)
        if key in ("intra_fraction", "deploy_fraction", "hetero_fraction", "hetero_multiplier"):
            return float(raw)
        if key in ("server_locality",):
            return _parse_bool(raw, key)
        if key == "policy":
            try:
                return PolicyVariant(raw)
            except ValueError:
                raise ValidationError(
                    f"policy: {raw!r} is not one of {[v.value for v in PolicyVariant]}"
                ) from None
        if key == "encoding_density":
            if raw.lower() == "all":
                return None
            return int(raw)
        if key == "tft_threshold":
            if raw.lower() == "disabled":
                return None
            return int(raw)
        if key == "scenario":
            if raw not in sim_engine.SCENARIOS:
                raise ValidationError(f"scenario: {raw!r} not in {sim_engine.SCENARIOS}")
            return raw
        if key == "underlay":
            return raw
    except ValidationError:
        raise
    except ValueError:
        raise ValidationError(f"{key}: cannot parse {raw!r}") from None
    raise ValidationError(f"unknown key {key!r}")


def parse_config(text: str) -> SimConfig:
    """Build a validated SimConfig from flat key=value lines.

    Unknown keys are rejected; '#' comments and blank lines are fine. An
    empty document yields the default setting.
    """
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {ln}: expected key=value, got {raw.strip()!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ParseError(f"line {ln}: unknown key {key!r}")
        if key in values:
            raise ParseError(f"line {ln}: duplicate key {key!r}")
        values[key] = _parse_value(key, rhs)
    cfg = SimConfig(**values)
    try:
        cfg.validate()
    except sim_engine.ConfigError as exc:
        raise ValidationError(str(exc)) from None
    return cfg


def load_config(path: str | Path) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# -- output documents -------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, PolicyVariant):
        return value.value
    return str(value)


def format_report(report: metrics.MetricsReport, config: SimConfig, seed: int) -> str:
    """Keyed, self-describing report document."""
    lines = ["# lancsim run report"]
    for key in CONFIG_KEYS:
        val = getattr(config, key) if key != "seed" else seed
        if key == "encoding_density" and val is None:
            val = "all"
        if key == "tft_threshold" and val is None:
            val = "disabled"
        lines.append(f"config.{key} {_fmt(val)}")
    lines += [
        f"idtr {_fmt(report.idtr)}",
        f"avg_dt {_fmt(report.avg_dt)}",
        f"max_dt {_fmt(report.max_dt)}",
        f"unfinished_count {report.unfinished_count}",
        f"unfinished_fraction {_fmt(report.unfinished_fraction)}",
        f"total_interdomain_block_hops {report.total_interdomain_block_hops}",
        f"interdomain_transfers {report.interdomain_transfers}",
        f"dependent_block_count {report.dependent_block_count}",
        f"total_transfers {report.total_transfers}",
        f"upload_cov {_fmt(report.upload_cov)}",
    ]
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        out[key] = value
    return out


def format_temporal(series) -> str:
    lines = ["slot,transfers,weighted_transfers"]
    lines += [f"{slot},{cnt},{weighted}" for slot, cnt, weighted in series]
    return "\n".join(lines) + "\n"


def parse_temporal(text: str) -> list[tuple[int, int, int]]:
    lines = text.splitlines()
    if lines[0] != "slot,transfers,weighted_transfers":
        raise ParseError(f"bad temporal header {lines[0]!r}")
    return [tuple(int(x) for x in ln.split(",")) for ln in lines[1:] if ln]


def format_histogram(histogram) -> str:
    lines = ["peer_id,asn,uploaded_blocks,finish_time"]
    for peer, asn, uploads, finish in histogram:
        lines.append(f"{peer},{asn},{uploads},{_fmt(finish) if finish is not None else ''}")
    return "\n".join(lines) + "\n"


def parse_histogram(text: str) -> list[tuple[int, int, int, float | None]]:
    lines = text.splitlines()
    if lines[0] != "peer_id,asn,uploaded_blocks,finish_time":
        raise ParseError(f"bad histogram header {lines[0]!r}")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        peer, asn, uploads, finish = ln.split(",")
        rows.append((int(peer), int(asn), int(uploads), float(finish) if finish else None))
    return rows


def format_trace(trace: sim_engine.TransferTrace) -> str:
    lines = ["t_request,t_arrive,src,dst,hops,dependent"]
    for r in trace.records:
        lines.append(f"{_fmt(r.t_request)},{_fmt(r.t_arrive)},{r.src},{r.dst},{r.hops},{int(r.dependent)}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> list[tuple]:
    lines = text.splitlines()
    if lines[0] != "t_request,t_arrive,src,dst,hops,dependent":
        raise ParseError(f"bad trace header {lines[0]!r}")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        t_req, t_arr, src, dst, hops, dep = ln.split(",")
        rows.append((float(t_req), float(t_arr), int(src), int(dst), int(hops), bool(int(dep))))
    return rows


# -- commands ----------------------------------------------------------------


def run_command(config_path: str, seed: int | None, out_dir: str) -> int:
    try:
        cfg = load_config(config_path)
    except FileNotFoundError:
        print(f"error: config file not found: {config_path}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if seed is not None:
        cfg.seed = seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report, trace = sim_engine.run(cfg)
    except (sim_engine.ConfigError, netmodel.DisconnectedTopology, netmodel.ParseError,
            netmodel.DisconnectedGraph, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    (out / "report.txt").write_text(format_report(report, cfg, cfg.seed))
    (out / "temporal.csv").write_text(format_temporal(report.temporal_series))
    (out / "uploads.csv").write_text(format_histogram(report.upload_histogram))
    (out / "trace.csv").write_text(format_trace(trace))
    print(f"wrote report.txt, temporal.csv, uploads.csv, trace.csv to {out}")
    return 0


@dataclass
class ExperimentPlan:
    """A one-dimensional sweep: one config, one swept field, several seeds."""

    base: SimConfig
    param: str
    values: list
    seeds: list[int]
    out_dir: Path

    def __post_init__(self):
        if self.param not in SWEEPABLE:
            raise ValidationError(f"cannot sweep {self.param!r}; choose from {SWEEPABLE}")
        if not self.seeds:
            raise ValidationError("need at least one seed")
        if not self.values:
            raise ValidationError("need at least one sweep value")


SWEEP_METRICS = ("idtr", "avg_dt", "max_dt", "unfinished_fraction", "total_transfers")


def _metric_value(report: metrics.MetricsReport, name: str):
    return getattr(report, name)


def sweep_command(plan: ExperimentPlan) -> int:
    """Run every (value, seed) point and aggregate mean/stddev per metric.

    Partial results are flushed to sweep.csv as each point completes.
    """
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = plan.out_dir / "sweep.csv"
    rows = ["param,value,policy,metric,mean,stddev,runs"]
    out_path.write_text("\n".join(rows) + "\n")
    for value in plan.values:
        per_metric: dict[str, list[float]] = {m: [] for m in SWEEP_METRICS}
        for seed in plan.seeds:
            cfg = SimConfig(**{**vars(plan.base), plan.param: value, "seed": seed})
            cfg.validate()
            report, _ = sim_engine.run(cfg)
            for m in SWEEP_METRICS:
                val = _metric_value(report, m)
                if val is not None:
                    per_metric[m].append(float(val))
        for m in SWEEP_METRICS:
            vals = per_metric[m]
            if not vals:
                continue
            mean = float(np.mean(vals))
            std = float(np.std(vals))
            rows.append(
                f"{plan.param},{_fmt(value)},{plan.base.policy.value},{m},{_fmt(mean)},{_fmt(std)},{len(vals)}"
            )
        out_path.write_text("\n".join(rows) + "\n")
        print(f"swept {plan.param}={value} ({len(plan.seeds)} seeds)")
    print(f"wrote {out_path}")
    return 0


def parse_sweep(text: str) -> list[tuple]:
    lines = text.splitlines()
    if lines[0] != "param,value,policy,metric,mean,stddev,runs":
        raise ParseError(f"bad sweep header {lines[0]!r}")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        param, value, policy, metric, mean, std, runs = ln.split(",")
        rows.append((param, value, policy, metric, float(mean), float(std), int(runs)))
    return rows


def bench_command(k: int, n: int, m: int, seconds: float, seed: int = 0) -> dict:
    """Measure sustained encode throughput over a random buffer.

    Reports measured bytes/second next to the analytic per-byte operation
    counts for the same (m, n, k).
    """
    if k < 1 or n < 1 or m < 1 or seconds <= 0:
        raise ValidationError("k, n, m must be >= 1 and seconds positive")
    rng = np.random.default_rng(seed)
    spec = FileSpec(n=n, k=k)
    buffer = rlnc.CoeffMatrix(n, k)
    # a generic full buffer: the n originals
    for block in rlnc.seed_blocks(rng.integers(0, 256, spec.total_bytes, dtype=np.uint8).tobytes(), spec):
        buffer.insert_and_reduce(block)

    blocks_done = 0
    start = time.perf_counter()
    deadline = start + seconds
    while time.perf_counter() < deadline:
        picks = rng.choice(n, size=m, replace=False) if m < n else np.arange(n)
        coeffs = rlnc.draw_local_coeffs(min(m, n), rng)
        buffer.combine(picks, coeffs)
        blocks_done += 1
    elapsed = time.perf_counter() - start
    mults, adds = rlnc.op_count_per_byte(m, n, k)
    return {
        "blocks_encoded": blocks_done,
        "bytes_per_second": blocks_done * k / elapsed,
        "mults_per_byte": float(mults),
        "adds_per_byte": float(adds),
    }


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="lancsim", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", help="sweep one config field over values x seeds")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True, help="comma separated")
    p_sweep.add_argument("--seeds", required=True, help="comma separated")
    p_sweep.add_argument("--out", required=True)

    p_bench = sub.add_parser("bench", help="measure encode throughput")
    p_bench.add_argument("--k", type=int, required=True)
    p_bench.add_argument("--n", type=int, required=True)
    p_bench.add_argument("--m", type=int, required=True)
    p_bench.add_argument("--seconds", type=float, default=2.0)

    args = ap.parse_args(argv)
    if args.command == "run":
        return run_command(args.config, args.seed, args.out)
    if args.command == "sweep":
        try:
            base = load_config(args.config)
            values = [_parse_value(args.param, v) for v in args.values.split(",")]
            seeds = [int(s) for s in args.seeds.split(",")]
            plan = ExperimentPlan(base=base, param=args.param, values=values,
                                  seeds=seeds, out_dir=Path(args.out))
        except (ParseError, ValidationError, FileNotFoundError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return sweep_command(plan)
    if args.command == "bench":
        try:
            stats = bench_command(args.k, args.n, args.m, args.seconds)
        except ValidationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for key, val in stats.items():
            print(f"{key} {_fmt(val) if isinstance(val, float) else val}")
        return 0
    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
