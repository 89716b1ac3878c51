"""Scenario files, presets, and the run/sweep/compare command line.

Scenario files are flat INI-style text with five sections (workload,
machine, policy, oversubscription, run); unknown sections or keys are
rejected.  `uvmsim run preset:NAME` resolves a scenario shipped inside
the package.  Exit codes: 0 success, 2 configuration or usage error,
3 simulated out-of-memory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import engine
from .memmodel import (AllocationError, AllocKind, Agent, ConfigError,
                       MachineConfig, OutOfMemoryError, UvmError)
from .policy import PolicyConfig
from .workload import (TraceSpec, WorkloadSpec, bfs_like, hotspot_like,
                       irregular, load_trace, mixed, parse_phase, qiskit_like,
                       regular, setup_oversubscription, srad_like)

_SIZE_SUFFIX = {
    "": 1, "b": 1,
    "k": 1 << 10, "kb": 1 << 10, "kib": 1 << 10,
    "m": 1 << 20, "mb": 1 << 20, "mib": 1 << 20,
    "g": 1 << 30, "gb": 1 << 30, "gib": 1 << 30,
}


def parse_size(text: str) -> int:
    """Parse sizes like 4096, 64k, 32MiB (binary suffixes)."""
    t = str(text).strip().lower()
    digits = t
    suffix = ""
    for i, ch in enumerate(t):
        if not (ch.isdigit() or ch == "_"):
            digits, suffix = t[:i], t[i:]
            break
    try:
        value = int(digits)
    except ValueError:
        raise ConfigError(f"bad size {text!r}")
    mult = _SIZE_SUFFIX.get(suffix.strip())
    if mult is None:
        raise ConfigError(f"bad size suffix in {text!r}")
    return value * mult


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


_MACHINE_SIZE_KEYS = {"cpu_capacity", "gpu_capacity", "gpu_reserved_baseline",
                      "cpu_cacheline", "gpu_cacheline", "system_page_size",
                      "gpu_page_size"}
_MACHINE_FLOAT_KEYS = {"cpu_bw", "gpu_bw", "c2c_bw_h2d", "c2c_bw_d2h",
                       "c2c_latency", "fault_cost_cpu",
                       "fault_cost_gpu_first_touch", "pte_create_cost",
                       "pte_teardown_cost", "migration_fixed_cost",
                       "notification_cost", "gpu_context_init_cost"}
_WORKLOAD_KEYS = {"preset", "trace", "buffers", "name", "working_set",
                  "iterations", "n_qubits", "shots", "init_side", "pattern",
                  "stride", "density", "reuse", "access_size"}
_POLICY_KEYS = {"allocator", "threshold", "prefetch_after_first_touch",
                "prefetch_mode", "prefetch_chunk"}
_OVERSUB_KEYS = {"ratio"}
_RUN_KEYS = {"seed", "sampling_ms", "out"}

_SECTION_KEYS = {
    "workload": _WORKLOAD_KEYS,
    "machine": _MACHINE_SIZE_KEYS | _MACHINE_FLOAT_KEYS,
    "policy": _POLICY_KEYS,
    "oversubscription": _OVERSUB_KEYS,
    "run": _RUN_KEYS,
}

_ALLOCATORS = {k.value: k for k in AllocKind}

PRESET_DESCRIPTIONS = {
    "hotspot-timeline": "CPU-initialized regular solver; memory-usage timeline",
    "qiskit-init": "GPU-initialized statevector; page-table init cost",
    "srad-iterations": "iterative solver with counter-driven migration waves",
    "oversub-sweep": "managed solver under growing memory oversubscription",
    "pagesize-sweep": "allocation/deallocation scaling across system page sizes",
}


class Scenario:
    """Parsed scenario: normalized key/value sections plus builders."""

    def __init__(self, data: dict[str, dict[str, str]], origin: Path | None = None):
        self.data = data
        self.origin = origin
        self._validate()

    # -- parsing ----------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, origin: Path | None = None) -> "Scenario":
        cp = configparser.ConfigParser(interpolation=None, strict=True)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"scenario parse error: {exc}")
        data: dict[str, dict[str, str]] = {}
        for section in cp.sections():
            data[section] = dict(cp.items(section))
        return cls(data, origin)

    @classmethod
    def from_file(cls, path) -> "Scenario":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"scenario file not found: {p}")
        return cls.from_text(p.read_text(encoding="utf-8"), origin=p)

    def _validate(self) -> None:
        for section, keys in self.data.items():
            allowed = _SECTION_KEYS.get(section)
            if allowed is None:
                raise ConfigError(f"unknown scenario section [{section}]")
            for key in keys:
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
        wl = self.data.get("workload", {})
        sources = [k for k in ("preset", "trace", "buffers") if k in wl]
        if not sources:
            raise ConfigError("workload section needs preset, trace, or buffers")
        if "preset" in wl and "trace" in wl:
            raise ConfigError("workload cannot have both preset and trace")
        if "trace" in wl:
            if "buffers" not in wl:
                raise ConfigError("trace workloads must declare buffers")
            if not self._trace_path().exists():
                raise ConfigError(f"trace file not found: {self._trace_path()}")

    def _trace_path(self) -> Path:
        p = Path(self.data["workload"]["trace"])
        if not p.is_absolute() and self.origin is not None:
            p = self.origin.parent / p
        return p

    # -- canonical serialization --------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for section in ("workload", "machine", "policy", "oversubscription", "run"):
            if section not in self.data:
                continue
            lines.append(f"[{section}]")
            for key in sorted(self.data[section]):
                lines.append(f"{key} = {self.data[section][key]}")
            lines.append("")
        return "\n".join(lines)

    # -- builders -------------------------------------------------------------------

    def machine(self) -> MachineConfig:
        kwargs = {}
        for key, raw in self.data.get("machine", {}).items():
            if key in _MACHINE_SIZE_KEYS:
                kwargs[key] = parse_size(raw)
            else:
                try:
                    kwargs[key] = float(raw)
                except ValueError:
                    raise ConfigError(f"bad machine value {key} = {raw!r}")
        return MachineConfig(**kwargs)

    def policy(self) -> PolicyConfig:
        sec = self.data.get("policy", {})
        kwargs = {}
        if "threshold" in sec:
            raw = sec["threshold"].strip().lower()
            if raw in ("off", "inf", "disabled"):
                kwargs["counters_enabled"] = False
            else:
                try:
                    kwargs["migration_threshold"] = int(raw)
                except ValueError:
                    raise ConfigError(f"bad threshold {sec['threshold']!r}")
        if "prefetch_after_first_touch" in sec:
            kwargs["prefetch_after_first_touch"] = parse_bool(
                sec["prefetch_after_first_touch"])
        if "prefetch_mode" in sec:
            kwargs["prefetch_mode"] = sec["prefetch_mode"].strip()
        if "prefetch_chunk" in sec:
            kwargs["prefetch_chunk_bytes"] = parse_size(sec["prefetch_chunk"])
        return PolicyConfig(**kwargs)

    def allocator(self) -> AllocKind | None:
        raw = self.data.get("policy", {}).get("allocator")
        if raw is None:
            return None
        kind = _ALLOCATORS.get(raw.strip().lower())
        if kind is None:
            raise ConfigError(f"unknown allocator {raw!r}")
        return kind

    def workload(self) -> WorkloadSpec | TraceSpec:
        wl = self.data["workload"]
        if "trace" in wl:
            spec = self._trace_spec(wl)
        elif "preset" in wl:
            spec = self._preset_spec(wl)
        else:
            spec = self._custom_spec(wl)
        kind = self.allocator()
        if kind is not None:
            spec.buffers = [(kind, length) for _, length in spec.buffers]
        return spec

    def _parse_buffers(self, raw: str) -> list[tuple[AllocKind, int]]:
        buffers = []
        for part in raw.split(","):
            part = part.strip()
            if not part:
                continue
            if ":" not in part:
                raise ConfigError(f"bad buffer spec {part!r} (want kind:length)")
            kind_tok, length_tok = part.split(":", 1)
            kind = _ALLOCATORS.get(kind_tok.strip().lower())
            if kind is None:
                raise ConfigError(f"unknown buffer kind {kind_tok!r}")
            buffers.append((kind, parse_size(length_tok)))
        if not buffers:
            raise ConfigError("empty buffer list")
        return buffers

    def _trace_spec(self, wl: dict) -> TraceSpec:
        events = load_trace(self._trace_path())
        iterations = 1
        for ev in events:
            kind, it = parse_phase(ev.phase)
            if kind == "compute":
                iterations = max(iterations, it + 1)
        return TraceSpec(name=wl.get("name", self._trace_path().stem),
                         buffers=self._parse_buffers(wl["buffers"]),
                         events=events, iterations=iterations)

    def _preset_spec(self, wl: dict) -> WorkloadSpec:
        preset = wl["preset"].strip().lower()
        iterations = int(wl["iterations"]) if "iterations" in wl else None
        working_set = parse_size(wl["working_set"]) if "working_set" in wl else None
        if preset == "hotspot":
            spec = hotspot_like(**_given(working_set=working_set,
                                         iterations=iterations))
        elif preset == "srad":
            spec = srad_like(**_given(working_set=working_set,
                                      iterations=iterations))
        elif preset == "bfs":
            spec = bfs_like(**_given(graph_bytes=working_set,
                                     iterations=iterations))
        elif preset == "qiskit":
            if "n_qubits" not in wl:
                raise ConfigError("qiskit preset needs n_qubits")
            spec = qiskit_like(int(wl["n_qubits"]),
                               **_given(shots=int(wl["shots"]) if "shots" in wl
                                        else None))
        else:
            raise ConfigError(f"unknown workload preset {preset!r}")
        return self._apply_overrides(spec, wl)

    def _custom_spec(self, wl: dict) -> WorkloadSpec:
        spec = WorkloadSpec(name=wl.get("name", "custom"),
                            buffers=self._parse_buffers(wl["buffers"]))
        return self._apply_overrides(spec, wl)

    def _apply_overrides(self, spec: WorkloadSpec, wl: dict) -> WorkloadSpec:
        kwargs = {}
        if "name" in wl:
            kwargs["name"] = wl["name"]
        if "init_side" in wl:
            side = wl["init_side"].strip().lower()
            if side not in ("cpu", "gpu"):
                raise ConfigError(f"bad init_side {wl['init_side']!r}")
            kwargs["init_side"] = Agent(side)
        if "pattern" in wl:
            pat = wl["pattern"].strip().lower()
            if pat == "regular":
                stride = parse_size(wl["stride"]) if "stride" in wl else None
                kwargs["pattern"] = regular(stride)
            elif pat == "irregular":
                density = float(wl["density"]) if "density" in wl else 1.0
                kwargs["pattern"] = irregular(density)
            elif pat == "mixed":
                kwargs["pattern"] = mixed()
            else:
                raise ConfigError(f"unknown pattern {wl['pattern']!r}")
        if "reuse" in wl:
            kwargs["reuse"] = float(wl["reuse"])
        if "access_size" in wl:
            kwargs["access_size"] = parse_size(wl["access_size"])
        return replace(spec, **kwargs) if kwargs else spec

    def seed(self) -> int:
        return int(self.data.get("run", {}).get("seed", 0))

    def sampling_ms(self) -> float:
        return float(self.data.get("run", {}).get("sampling_ms", 100.0))

    def out_dir(self) -> str:
        return self.data.get("run", {}).get("out", "uvmsim-out")

    def oversub_ratio(self) -> float | None:
        raw = self.data.get("oversubscription", {}).get("ratio")
        return None if raw is None else float(raw)

    def with_overrides(self, **section_updates) -> "Scenario":
        data = {s: dict(kv) for s, kv in self.data.items()}
        for section, kv in section_updates.items():
            data.setdefault(section, {}).update(kv)
        return Scenario(data, self.origin)


def _given(**kwargs) -> dict:
    return {k: v for k, v in kwargs.items() if v is not None}


# -- preset resolution --------------------------------------------------------------


def preset_names() -> list[str]:
    root = resources.files("uvmsim") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def load_scenario(ref: str) -> Scenario:
    if ref.startswith("preset:"):
        name = ref.split(":", 1)[1]
        root = resources.files("uvmsim") / "presets"
        entry = root / f"{name}.scn"
        if not entry.is_file():
            raise ConfigError(f"unknown preset {name!r}; see `uvmsim presets list`")
        return Scenario.from_text(entry.read_text(encoding="utf-8"))
    return Scenario.from_file(ref)


# -- commands --------------------------------------------------------------------------


def _apply_flags(scenario: Scenario, args) -> Scenario:
    machine = {}
    policy = {}
    run_sec = {}
    if getattr(args, "page_size", None):
        token = args.page_size.lower()
        size = {"4k": 4096, "64k": 65536}.get(token)
        if size is None:
            size = parse_size(token)
        machine["system_page_size"] = str(size)
    if getattr(args, "threshold", None):
        policy["threshold"] = args.threshold
    if getattr(args, "seed", None) is not None:
        run_sec["seed"] = str(args.seed)
    if getattr(args, "sampling_ms", None) is not None:
        run_sec["sampling_ms"] = repr(args.sampling_ms)
    if getattr(args, "out", None):
        run_sec["out"] = args.out
    updates = {}
    if machine:
        updates["machine"] = machine
    if policy:
        updates["policy"] = policy
    if run_sec:
        updates["run"] = run_sec
    return scenario.with_overrides(**updates) if updates else scenario


def _execute(scenario: Scenario, out: Path) -> engine.SimulationReport:
    machine = scenario.machine()
    pol = scenario.policy()
    spec = scenario.workload()
    ratio = scenario.oversub_ratio()
    setup = None
    if ratio is not None:
        setup = setup_oversubscription(ratio, spec.working_set(), machine)
    report = engine.run(spec, machine, pol, setup,
                        sampling_period=scenario.sampling_ms() / 1e3,
                        seed=scenario.seed())
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "report.json")
    report.write_csvs(out)
    return report


def _summary_line(tag: str, report: engine.SimulationReport, out: Path) -> str:
    return (f"{tag} name={report.name} total_time_s={report.total_time_s!r} "
            f"amplification={report.amplification!r} "
            f"migrations={len(report.migrations)} out={out}")


def cmd_run(args) -> int:
    scenario = _apply_flags(load_scenario(args.scenario), args)
    out = Path(scenario.out_dir())
    report = _execute(scenario, out)
    print(_summary_line("run", report, out))
    return 0


_SWEEP_HEADER = ["value", "total_time_s", "t_init_s", "t_compute_s",
                 "t_dealloc_s", "c2c_bytes"]


def _sweep_variant(scenario: Scenario, axis: str, token: str) -> Scenario:
    if axis == "page_size":
        size = parse_size(token)
        return scenario.with_overrides(machine={"system_page_size": str(size)})
    if axis == "threshold":
        return scenario.with_overrides(policy={"threshold": token})
    if axis == "oversub_ratio":
        float(token)
        return scenario.with_overrides(oversubscription={"ratio": token})
    raise ConfigError(f"unknown sweep axis {axis!r}")


def cmd_sweep(args) -> int:
    scenario = _apply_flags(load_scenario(args.scenario), args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = Path(scenario.out_dir())
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for token in values:
        variant = _sweep_variant(scenario, args.axis, token)
        point_dir = out / f"point-{token.replace('/', '_')}"
        try:
            report = _execute(variant.with_overrides(run={"out": str(point_dir)}),
                              point_dir)
        except UvmError as exc:
            print(f"sweep point {token}: failed: {exc}", file=sys.stderr)
            print(f"sweep point={token} status=error")
            continue
        c2c = report.traffic["c2c_h2d"] + report.traffic["c2c_d2h"] \
            + report.traffic["c2c_writeback"]
        rows.append([token, repr(report.total_time_s),
                     repr(report.timings.t_init), repr(report.timings.t_compute),
                     repr(report.timings.t_dealloc), c2c])
        print(_summary_line(f"sweep point={token}", report, point_dir))
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SWEEP_HEADER)
        w.writerows(rows)
    return 0


def cmd_compare(args) -> int:
    if len(args.reports) < 2:
        raise ConfigError("compare needs at least two report files")
    reports = []
    for path in args.reports:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"report not found: {p}")
        reports.append(engine.SimulationReport.load_json(p))
    labels = [Path(p).parent.name or Path(p).stem for p in args.reports]
    rows = engine.compare(reports, labels)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    engine.write_compare_csv(rows, out / "compare.csv")
    for row in rows:
        print(f"compare label={row['label']} total_time_s={row['total_time_s']!r} "
              f"speedup_total={row['speedup_total']!r}")
    return 0


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(f"{name}\t{PRESET_DESCRIPTIONS.get(name, '')}")
        return 0
    raise ConfigError(f"unknown presets action {args.action!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uvmsim",
                                 description="CPU-GPU unified memory simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (overrides scenario)")
        p.add_argument("--seed", type=int, help="workload seed")
        p.add_argument("--sampling-ms", type=float, dest="sampling_ms",
                       help="profiler sampling period in ms (default 100)")
        p.add_argument("--page-size", choices=["4k", "64k"], dest="page_size",
                       help="system page size")
        p.add_argument("--threshold", help="migration threshold count, or 'off'")

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("scenario", help="scenario file or preset:NAME")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario across an axis")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--axis", required=True,
                         choices=["page_size", "threshold", "oversub_ratio"])
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="compare report JSON files")
    p_cmp.add_argument("reports", nargs="*")
    p_cmp.add_argument("--out", help="directory for compare.csv (default .)")
    p_cmp.set_defaults(func=cmd_compare)

    p_presets = sub.add_parser("presets", help="inspect shipped presets")
    p_presets.add_argument("action", choices=["list"])
    p_presets.set_defaults(func=cmd_presets)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (OutOfMemoryError, AllocationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UvmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
