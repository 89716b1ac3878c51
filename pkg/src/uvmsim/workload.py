"""Synthetic access-pattern generators, trace ingestion, oversubscription setup.

All generators are deterministic: the same (spec, seed) pair yields a
byte-identical event stream.  Randomness for irregular patterns comes from
string-seeded generators so it is stable across processes and platforms.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .memmodel import Agent, AllocKind, ConfigError, MachineConfig
from .xconnect import Op

PHASE_ALLOC = "alloc"
PHASE_INIT = "init"
PHASE_DEALLOC = "dealloc"


def compute_phase(iteration: int) -> str:
    return f"compute:{iteration}"


def parse_phase(tag: str) -> tuple[str, int | None]:
    """Split a phase tag into (kind, iteration index)."""
    if tag in (PHASE_ALLOC, PHASE_INIT, PHASE_DEALLOC):
        return tag, None
    if tag.startswith("compute:"):
        try:
            it = int(tag.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad compute phase tag {tag!r}")
        if it < 0:
            raise ConfigError(f"bad compute phase tag {tag!r}")
        return "compute", it
    raise ConfigError(f"unknown phase tag {tag!r}")


@dataclass(slots=True)
class AccessEvent:
    agent: Agent
    op: Op
    addr: int
    size: int
    phase: str


@dataclass(slots=True)
class PrefetchEvent:
    """Explicit bulk placement request for [addr, addr+length) at dest."""

    dest: Agent
    addr: int
    length: int
    phase: str


Event = AccessEvent  # common case; streams may also carry PrefetchEvent


@dataclass
class Pattern:
    kind: str                    # regular | irregular | mixed
    stride: int | None = None    # regular: spacing between access starts
    density: float | None = None  # irregular: fraction of pages per iteration

    def __post_init__(self):
        if self.kind not in ("regular", "irregular", "mixed"):
            raise ConfigError(f"unknown pattern {self.kind!r}")
        if self.kind == "irregular":
            d = 1.0 if self.density is None else self.density
            if not 0 < d <= 1:
                raise ConfigError(f"irregular density must be in (0, 1], got {d}")
            self.density = d


def regular(stride: int | None = None) -> Pattern:
    return Pattern("regular", stride=stride)


def irregular(density: float = 1.0) -> Pattern:
    return Pattern("irregular", density=density)


def mixed() -> Pattern:
    return Pattern("mixed")


@dataclass
class WorkloadSpec:
    """Deterministic description of one application's memory behaviour.

    Buffers are (kind, length) pairs allocated in order.  The init phase
    touches every page of the system/managed/pinned buffers once from
    init_side; each compute iteration issues GPU reads covering
    reuse x working set, ordered by the pattern.
    """

    name: str
    buffers: list[tuple[AllocKind, int]]
    init_side: Agent = Agent.CPU
    pattern: Pattern = field(default_factory=lambda: regular())
    iterations: int = 1
    reuse: float = 1.0
    access_size: int = 8

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 < self.reuse <= 1:
            raise ConfigError(f"reuse must be in (0, 1], got {self.reuse}")
        if self.access_size < 1:
            raise ConfigError("access_size must be >= 1")
        if not self.buffers:
            raise ConfigError("workload needs at least one buffer")
        for kind, length in self.buffers:
            if length <= 0:
                raise ConfigError("buffer lengths must be positive")

    def working_set(self) -> int:
        """Bytes covered by the generated phases (device scratch excluded)."""
        return sum(length for kind, length in self.buffers
                   if kind is not AllocKind.DEVICE_ONLY)

    def identity(self) -> dict:
        """Shape of the workload, independent of the allocator kinds in use."""
        return {
            "name": self.name,
            "lengths": [length for _, length in self.buffers],
            "init_side": self.init_side.value,
            "pattern": self.pattern.kind,
            "iterations": self.iterations,
            "reuse": self.reuse,
            "access_size": self.access_size,
        }


# -- generators ---------------------------------------------------------------


def _buffer_bases(spec: WorkloadSpec, bases: list[int]) -> list[tuple[int, AllocKind, int]]:
    if len(bases) != len(spec.buffers):
        raise ConfigError("one base address per buffer required")
    return [(base, kind, length) for base, (kind, length) in zip(bases, spec.buffers)]


def _iter_pages(base: int, length: int, page: int) -> Iterator[int]:
    for off in range(0, length, page):
        yield base + off


def gen_workload(spec: WorkloadSpec, bases: list[int], cfg: MachineConfig,
                 seed: int = 0) -> Iterator[AccessEvent | PrefetchEvent]:
    """Yield the full deterministic event stream for a workload.

    `bases` are the virtual base addresses the engine assigned to the
    buffers, in declaration order.
    """
    page = cfg.system_page_size
    buffers = _buffer_bases(spec, bases)
    touchable = [(b, k, n) for b, k, n in buffers if k is not AllocKind.DEVICE_ONLY]

    # Init: every page touched exactly once from the initializing side.
    for base, kind, length in touchable:
        for addr in _iter_pages(base, length, page):
            yield AccessEvent(spec.init_side, Op.WRITE, addr, spec.access_size, PHASE_INIT)

    for it in range(spec.iterations):
        tag = compute_phase(it)
        for bi, (base, kind, length) in enumerate(touchable):
            yield from _compute_iteration(spec, base, length, page, seed, it, bi, tag)


def _compute_iteration(spec: WorkloadSpec, base: int, length: int, page: int,
                       seed: int, iteration: int, buffer_index: int,
                       tag: str) -> Iterator[AccessEvent]:
    budget = int(spec.reuse * length) // spec.access_size
    pat = spec.pattern
    if pat.kind == "regular":
        stride = pat.stride or spec.access_size
        count = min(budget, max(1, int(spec.reuse * length) // stride))
        for k in range(count):
            yield AccessEvent(Agent.GPU, Op.READ, base + k * stride, spec.access_size, tag)
        return

    npages = length // page
    per_page = max(1, page // spec.access_size)
    if pat.kind == "irregular":
        pages = _sample_pages(npages, pat.density, seed, iteration, buffer_index)
        per_page = max(1, int(spec.reuse * per_page))
        for p in pages:
            start = base + p * page
            for k in range(per_page):
                yield AccessEvent(Agent.GPU, Op.READ, start + k * spec.access_size,
                                  spec.access_size, tag)
        return

    # mixed: a regular sweep over the first half, then an irregular burst
    # over the whole range with the other half of the budget (1:1 ratio).
    half = budget // 2
    for k in range(half):
        yield AccessEvent(Agent.GPU, Op.READ, base + k * spec.access_size,
                          spec.access_size, tag)
    pages = _sample_pages(npages, 0.5, seed, iteration, buffer_index)
    if pages:
        burst_per_page = max(1, half // len(pages))
        for p in pages:
            start = base + p * page
            for k in range(min(burst_per_page, per_page)):
                yield AccessEvent(Agent.GPU, Op.READ, start + k * spec.access_size,
                                  spec.access_size, tag)


def _sample_pages(npages: int, density: float, seed: int, iteration: int,
                  buffer_index: int) -> list[int]:
    """Deterministic distinct-page sample for one iteration of one buffer."""
    count = max(1, int(density * npages))
    rng = random.Random(f"uvmsim:{seed}:{buffer_index}:{iteration}")
    return rng.sample(range(npages), count)


# -- application-shaped presets ------------------------------------------------


def srad_like(working_set: int = 1_500_000_000, iterations: int = 12,
              kind: AllocKind = AllocKind.SYSTEM) -> WorkloadSpec:
    """Iterative stencil-style workload: CPU init, full-set read sweeps.

    Every iteration reads the whole working set.  The 1 KiB access size
    makes each page accumulate page_size/1024 accesses per iteration, so
    the default promotion threshold of 256 is crossed only after several
    full sweeps and the migration wave lands mid-run rather than in the
    first iteration.
    """
    if iterations < 2:
        raise ConfigError("iterative workload needs at least 2 iterations")
    return WorkloadSpec(
        name="srad_like",
        buffers=[(kind, working_set)],
        init_side=Agent.CPU,
        pattern=regular(stride=1024),
        iterations=iterations,
        reuse=1.0,
        access_size=1024,
    )


def hotspot_like(working_set: int = 32 * (1 << 20), iterations: int = 4,
                 kind: AllocKind = AllocKind.SYSTEM) -> WorkloadSpec:
    """Dense regular solver: CPU init, contiguous read sweeps per iteration."""
    return WorkloadSpec(
        name="hotspot_like",
        buffers=[(kind, working_set)],
        init_side=Agent.CPU,
        pattern=regular(stride=1024),
        iterations=iterations,
        reuse=1.0,
        access_size=1024,
    )


def statevector_bytes(n_qubits: int) -> int:
    """Memory footprint of a double-amplitude statevector."""
    if n_qubits < 1:
        raise ConfigError("n_qubits must be >= 1")
    return 8 * (1 << n_qubits)


def qiskit_like(n_qubits: int, shots: int = 10,
                kind: AllocKind = AllocKind.SYSTEM) -> WorkloadSpec:
    """Statevector simulation shape: GPU-side init, mixed access compute."""
    return WorkloadSpec(
        name=f"qiskit_like_{n_qubits}q",
        buffers=[(kind, statevector_bytes(n_qubits))],
        init_side=Agent.GPU,
        pattern=mixed(),
        iterations=shots,
        reuse=1.0,
        access_size=1024,
    )


def bfs_like(graph_bytes: int = 16 * (1 << 20), iterations: int = 4,
             kind: AllocKind = AllocKind.SYSTEM) -> WorkloadSpec:
    """Graph traversal shape: read-only irregular walk over the graph buffer."""
    return WorkloadSpec(
        name="bfs_like",
        buffers=[(kind, graph_bytes)],
        init_side=Agent.CPU,
        pattern=irregular(density=0.5),
        iterations=iterations,
        reuse=1.0,
        access_size=64,
    )


PRESET_WORKLOADS = {
    "srad": srad_like,
    "hotspot": hotspot_like,
    "qiskit": qiskit_like,
    "bfs": bfs_like,
}


# -- oversubscription ----------------------------------------------------------


@dataclass(frozen=True)
class OversubscriptionSetup:
    """Pre-existing device reservation shrinking usable GPU memory."""

    reserved_bytes: int
    m_peak: int
    m_gpu: int
    r_oversub: float


def setup_oversubscription(target_ratio: float, m_peak: int,
                           cfg: MachineConfig) -> OversubscriptionSetup:
    """Pick a device reservation so m_peak / usable GPU memory hits the target.

    The reservation is rounded to the device page size, so the achieved
    ratio can differ from the target by up to one page's worth; the exact
    achieved ratio is returned.
    """
    if target_ratio <= 0:
        raise ConfigError(f"oversubscription ratio must be positive, got {target_ratio}")
    if m_peak <= 0:
        raise ConfigError("m_peak must be positive")
    usable = cfg.gpu_capacity - cfg.gpu_reserved_baseline
    want_free = m_peak / target_ratio
    raw = usable - want_free
    page = cfg.gpu_page_size
    reserved = max(0, round(raw / page)) * page
    m_gpu = usable - reserved
    if m_gpu <= 0:
        raise ConfigError(
            f"ratio {target_ratio} unattainable: usable GPU memory would be {m_gpu}")
    return OversubscriptionSetup(reserved, m_peak, m_gpu, m_peak / m_gpu)


# -- trace files ----------------------------------------------------------------


class TraceParseError(ConfigError):
    """Malformed trace line, with its 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"trace line {line_no}: {message}")
        self.line_no = line_no


_AGENTS = {"cpu": Agent.CPU, "gpu": Agent.GPU}
_OPS = {"r": Op.READ, "w": Op.WRITE, "a": Op.ATOMIC}


def parse_trace_lines(lines: Iterable[str]) -> list[AccessEvent | PrefetchEvent]:
    """Parse `agent,op,hex_addr,size,phase_tag` lines; `#` starts a comment."""
    events: list[AccessEvent | PrefetchEvent] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise TraceParseError(line_no, f"expected 5 fields, got {len(parts)}")
        agent_tok, op_tok, addr_tok, size_tok, phase = parts
        agent = _AGENTS.get(agent_tok.lower())
        if agent is None:
            raise TraceParseError(line_no, f"bad agent token {agent_tok!r}")
        try:
            addr = int(addr_tok, 0)
        except ValueError:
            raise TraceParseError(line_no, f"bad address {addr_tok!r}")
        try:
            size = int(size_tok)
        except ValueError:
            raise TraceParseError(line_no, f"bad size {size_tok!r}")
        if size < 1:
            raise TraceParseError(line_no, f"size must be >= 1, got {size}")
        try:
            parse_phase(phase)
        except ConfigError as exc:
            raise TraceParseError(line_no, str(exc))
        op_key = op_tok.lower()
        if op_key == "p":
            events.append(PrefetchEvent(agent, addr, size, phase))
            continue
        op = _OPS.get(op_key)
        if op is None:
            raise TraceParseError(line_no, f"bad op token {op_tok!r}")
        events.append(AccessEvent(agent, op, addr, size, phase))
    return events


def load_trace(path) -> list[AccessEvent | PrefetchEvent]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace_lines(fh)


@dataclass
class TraceSpec:
    """A recorded event stream plus the buffers it plays over."""

    name: str
    buffers: list[tuple[AllocKind, int]]
    events: list[AccessEvent | PrefetchEvent]
    iterations: int = 1

    def working_set(self) -> int:
        return sum(length for kind, length in self.buffers
                   if kind is not AllocKind.DEVICE_ONLY)

    def identity(self) -> dict:
        return {
            "name": self.name,
            "lengths": [length for _, length in self.buffers],
            "events": len(self.events),
            "iterations": self.iterations,
        }
