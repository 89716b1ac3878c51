"""Brute-force reference interpreter for small traces.

Direct per-access state machine over plain dicts and tuples, kept
deliberately independent of the package's policy and engine code.  It
tracks page placement, access counters, migrations, and byte counters
only (no timing), and is the ground truth the engine is compared against
on randomized traces.

Event tuples:
    ("access", agent, op, addr, size, phase)   agent: cpu|gpu, op: r|w|a
    ("prefetch", dest, addr, length, phase)    dest: cpu|gpu

Result dict:
    migrations: [(cause, direction, vpn_start, vpn_end, pages, bytes)]
    counters:   byte counters keyed like the engine's traffic counters
    oom:        event index of an out-of-memory stop, or None
"""

VA_BASE = 0x1_0000_0000


def _ceil_to(value, multiple):
    return -(-value // multiple) * multiple


def run_oracle(buffers, events, machine, policy, reserved_bytes=0):
    sys_page = machine["system_page_size"]
    gpu_page = machine["gpu_page_size"]
    cl = {"cpu": machine["cpu_cacheline"], "gpu": machine["gpu_cacheline"]}
    gpu_cap = machine["gpu_capacity"]
    cpu_cap = machine["cpu_capacity"]
    baseline = machine["gpu_reserved_baseline"]

    threshold = policy["threshold"]
    counters_on = policy["counters_enabled"]
    chunk_bytes = policy.get("chunk_bytes", gpu_page)
    pf_chunk = policy.get("prefetch_chunk", gpu_page)
    pf_first_touch = policy.get("prefetch_after_first_touch", False)
    pf_mode = policy.get("prefetch_mode", "none")

    counters = {
        "gpu_local_read": 0, "gpu_local_write": 0,
        "cpu_local_read": 0, "cpu_local_write": 0,
        "c2c_h2d": 0, "c2c_d2h": 0, "c2c_writeback": 0,
        "migrated_h2d": 0, "migrated_d2h": 0, "requested_bytes": 0,
    }
    migrations = []

    # Build allocations with a bump allocator; pages keyed by start address.
    allocs = []
    pages = {}
    cursor = VA_BASE
    gpu_used = baseline + reserved_bytes
    cpu_used = 0
    for kind, length in buffers:
        page = gpu_page if kind == "device_only" else sys_page
        length = _ceil_to(length, page)
        base = _ceil_to(cursor, gpu_page)
        cursor = base + length
        aidx = len(allocs)
        allocs.append({"base": base, "length": length, "kind": kind, "page": page})
        for start in range(base, base + length, page):
            tier = None
            if kind == "device_only":
                tier = "gpu"
                gpu_used += page
            elif kind == "host_pinned":
                tier = "cpu"
                cpu_used += page
            pages[start] = {"start": start, "bytes": page, "kind": kind,
                            "alloc": aidx, "tier": tier, "splintered": False,
                            "counter": 0, "touch": -1}
    if gpu_used > gpu_cap:
        raise ValueError("oracle setup exceeds GPU capacity")

    def page_of(addr):
        for a in allocs:
            if a["base"] <= addr < a["base"] + a["length"]:
                start = a["base"] + ((addr - a["base"]) // a["page"]) * a["page"]
                return pages[start]
        return None

    def region_pages(alloc_idx, addr, span):
        a = allocs[alloc_idx]
        lo = max(a["base"], (addr // span) * span)
        hi = min(a["base"] + a["length"], lo + span)
        return [pages[s] for s in range(lo, hi, a["page"])]

    def gpu_free():
        return gpu_cap - gpu_used

    def record(cause, direction, moved):
        vpns = sorted(p["start"] // sys_page for p in moved)
        nbytes = sum(p["bytes"] for p in moved)
        migrations.append((cause, direction, vpns[0], vpns[-1], len(moved), nbytes))
        if direction == "h2d":
            counters["migrated_h2d"] += nbytes
            counters["c2c_h2d"] += nbytes
        else:
            counters["migrated_d2h"] += nbytes
            counters["c2c_d2h"] += nbytes

    def move(p, to, splinter=False):
        nonlocal gpu_used, cpu_used
        if to == "gpu":
            gpu_used += p["bytes"]
            cpu_used -= p["bytes"]
        else:
            cpu_used += p["bytes"]
            gpu_used -= p["bytes"]
        p["tier"] = to
        p["counter"] = 0
        p["splintered"] = splinter if to == "cpu" else False

    def map_page(p, tier, idx):
        nonlocal gpu_used, cpu_used
        if tier == "gpu":
            gpu_used += p["bytes"]
        else:
            cpu_used += p["bytes"]
        p["tier"] = tier
        p["touch"] = idx

    class Oom(Exception):
        pass

    def evict_for(needed, exclude=()):
        excluded = set(exclude)
        while gpu_free() < needed:
            best_key, best_pages = None, None
            chunk_groups = {}
            for p in pages.values():
                if p["tier"] != "gpu" or p["start"] in excluded:
                    continue
                if p["kind"] == "system":
                    key = (p["touch"], p["start"])
                    if best_key is None or key < best_key:
                        best_key, best_pages = key, [p]
                elif p["kind"] == "managed":
                    g = (p["alloc"], p["start"] // chunk_bytes)
                    chunk_groups.setdefault(g, []).append(p)
            for group in chunk_groups.values():
                key = (max(p["touch"] for p in group), min(p["start"] for p in group))
                if best_key is None or key < best_key:
                    best_key, best_pages = key, group
            if best_pages is None:
                raise Oom()
            for p in sorted(best_pages, key=lambda q: q["start"]):
                move(p, "cpu", splinter=(p["kind"] == "managed"))
            record("eviction", "d2h", best_pages)

    def do_prefetch(addr, length, dest, idx):
        p0 = page_of(addr)
        if p0 is None:
            raise ValueError("prefetch outside allocations")
        a = allocs[p0["alloc"]]
        if a["kind"] in ("device_only", "host_pinned"):
            return
        lo = a["base"] + ((addr - a["base"]) // a["page"]) * a["page"]
        hi = min(a["base"] + a["length"], addr + length)
        span = [pages[s] for s in range(lo, hi, a["page"])]
        to_map = [p for p in span if p["tier"] is None]
        to_move = [p for p in span if p["tier"] not in (None, dest)]
        if not to_map and not to_move:
            return
        needed = sum(p["bytes"] for p in to_map + to_move)
        if dest == "gpu":
            evict_for(needed, exclude=[p["start"] for p in span])
        elif cpu_used + needed > cpu_cap:
            raise Oom()
        for p in to_map:
            map_page(p, dest, idx)
        for p in to_move:
            move(p, dest)
        moved_bytes = sum(p["bytes"] for p in to_move)
        vpns = sorted(p["start"] // sys_page for p in to_map + to_move)
        migrations.append(("explicit_prefetch", "h2d" if dest == "gpu" else "d2h",
                           vpns[0], vpns[-1], len(to_map) + len(to_move), moved_bytes))
        if moved_bytes:
            if dest == "gpu":
                counters["migrated_h2d"] += moved_bytes
                counters["c2c_h2d"] += moved_bytes
            else:
                counters["migrated_d2h"] += moved_bytes
                counters["c2c_d2h"] += moved_bytes

    def remote(agent, op, size):
        line = cl[agent]
        wire = _ceil_to(size, line)
        read_dir = "c2c_h2d" if agent == "gpu" else "c2c_d2h"
        if op == "r":
            counters[read_dir] += wire
        elif op == "w":
            counters["c2c_writeback"] += wire
        else:
            counters[read_dir] += line
            counters["c2c_writeback"] += line

    def local(agent, op, size):
        pre = "gpu_local" if agent == "gpu" else "cpu_local"
        if op in ("r", "a"):
            counters[pre + "_read"] += size
        if op in ("w", "a"):
            counters[pre + "_write"] += size

    before_compute_done = False

    try:
        for idx, ev in enumerate(events):
            phase = ev[-1]
            in_compute = phase.startswith("compute")
            if pf_mode == "before_compute" and in_compute and not before_compute_done:
                before_compute_done = True
                for a in allocs:
                    if a["kind"] in ("system", "managed"):
                        do_prefetch(a["base"], a["length"], "gpu", idx)

            if ev[0] == "prefetch":
                _, dest, addr, length, _ = ev
                do_prefetch(addr, length, dest, idx)
                continue

            _, agent, op, addr, size, _ = ev
            counters["requested_bytes"] += size
            p = page_of(addr)
            if p is None:
                raise ValueError(f"event {idx}: unallocated address {addr:#x}")
            kind = p["kind"]

            if p["tier"] is None:
                # first touch
                if agent == "cpu":
                    if cpu_used + p["bytes"] > cpu_cap:
                        raise Oom()
                    map_page(p, "cpu", idx)
                elif kind == "managed":
                    chunk = [q for q in region_pages(p["alloc"], addr, chunk_bytes)
                             if q["tier"] is None]
                    evict_for(sum(q["bytes"] for q in chunk))
                    for q in chunk:
                        map_page(q, "gpu", idx)
                else:
                    evict_for(p["bytes"])
                    map_page(p, "gpu", idx)
                    if kind == "system" and pf_first_touch:
                        do_prefetch((addr // pf_chunk) * pf_chunk, pf_chunk, "gpu", idx)
                local(agent, op, size)
            elif (agent == "gpu") == (p["tier"] == "gpu"):
                local(agent, op, size)
            elif kind == "device_only":
                raise ValueError(f"event {idx}: CPU access to device-only page")
            elif kind == "host_pinned":
                remote(agent, op, size)
            elif kind == "system":
                remote(agent, op, size)
                if agent == "gpu" and counters_on:
                    p["counter"] += 1
                    if p["counter"] > threshold:
                        region = region_pages(p["alloc"], addr, chunk_bytes)
                        movable = [q for q in region if q["tier"] == "cpu"]
                        for q in region:
                            q["counter"] = 0
                        nbytes = sum(q["bytes"] for q in movable)
                        if 0 < nbytes <= gpu_free():
                            for q in movable:
                                move(q, "gpu")
                            record("access_counter", "h2d", movable)
            else:  # managed, opposite tier
                if agent == "gpu":
                    if pf_mode == "streaming" and in_compute:
                        do_prefetch((addr // chunk_bytes) * chunk_bytes, chunk_bytes,
                                    "gpu", idx)
                        local(agent, op, size)
                    elif p["splintered"]:
                        if gpu_free() >= p["bytes"]:
                            move(p, "gpu")
                            record("on_demand_fault", "h2d", [p])
                            local(agent, op, size)
                        else:
                            remote(agent, op, size)
                    else:
                        chunk = [q for q in region_pages(p["alloc"], addr, chunk_bytes)
                                 if q["tier"] == "cpu"]
                        evict_for(sum(q["bytes"] for q in chunk))
                        for q in sorted(chunk, key=lambda q: q["start"]):
                            move(q, "gpu")
                        record("on_demand_fault", "h2d", chunk)
                        local(agent, op, size)
                else:  # cpu touching gpu-resident managed data
                    chunk = [q for q in region_pages(p["alloc"], addr, chunk_bytes)
                             if q["tier"] == "gpu"]
                    if cpu_used + sum(q["bytes"] for q in chunk) > cpu_cap:
                        raise Oom()
                    for q in sorted(chunk, key=lambda q: q["start"]):
                        move(q, "cpu")
                    record("on_demand_fault", "d2h", chunk)
                    local(agent, op, size)
            p["touch"] = idx
    except Oom:
        return {"migrations": migrations, "counters": counters, "oom": idx}

    return {"migrations": migrations, "counters": counters, "oom": None}
