"""Processing-unit topology from Linux sysfs, ordered for pinning.

The machine is modelled as a tree: package, then shared caches from the
outermost level inwards, then physical core, then processing unit (PU).
Leaves are enumerated depth first, so SMT siblings come out next to each
other and cores sharing a cache stay together.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

SYSFS_CPU = "/sys/devices/system/cpu"


class TopologyError(RuntimeError):
    pass


@dataclass
class TopoNode:
    kind: str
    index: int
    children: list["TopoNode"] = field(default_factory=list)

    def child(self, kind: str, index: int) -> "TopoNode":
        for c in self.children:
            if c.kind == kind and c.index == index:
                return c
        node = TopoNode(kind, index)
        self.children.append(node)
        return node

    def first_pu(self) -> int:
        if self.kind == "pu":
            return self.index
        return min(c.first_pu() for c in self.children)

    def sort(self) -> None:
        self.children.sort(key=TopoNode.first_pu)
        for c in self.children:
            c.sort()


def dfs_leaves(node: TopoNode) -> list[int]:
    """PU indices in depth-first leaf order."""
    if node.kind == "pu":
        return [node.index]
    out = []
    for c in node.children:
        out.extend(dfs_leaves(c))
    return out


def parse_cpu_list(text: str) -> list[int]:
    """Parse the kernel's cpu list format, e.g. ``"0-3,8,10-11"``."""
    cpus = []
    for part in text.strip().split(","):
        if not part:
            continue
        lo, _, hi = part.partition("-")
        cpus.extend(range(int(lo), int(hi or lo) + 1))
    return cpus


def _read(path: Path) -> str:
    try:
        return path.read_text().strip()
    except OSError as exc:
        raise TopologyError(f"cannot read {path}: {exc}") from None


def _pu_path(root: Path, cpu: int) -> list[tuple[str, int]]:
    base = root / f"cpu{cpu}"
    topo = base / "topology"
    package = int(_read(topo / "physical_package_id"))
    path = [("package", package)]
    caches = []
    cache_dir = base / "cache"
    if cache_dir.is_dir():
        for idx in cache_dir.glob("index*"):
            if _read(idx / "type") == "Instruction":
                continue
            level = int(_read(idx / "level"))
            shared = parse_cpu_list(_read(idx / "shared_cpu_list"))
            caches.append((level, min(shared)))
    # outermost cache first; a cache private to the core adds no grouping
    # but keeps the tree shape honest
    for level, first in sorted(caches, reverse=True):
        path.append((f"L{level}", first))
    siblings_file = topo / "core_cpus_list"
    if not siblings_file.exists():
        siblings_file = topo / "thread_siblings_list"
    siblings = parse_cpu_list(_read(siblings_file))
    path.append(("core", min(siblings)))
    path.append(("pu", cpu))
    return path


def read_topology(root=SYSFS_CPU, cpus=None) -> TopoNode:
    """Build the topology tree for ``cpus`` (default: this process's
    affinity set). Raises TopologyError when sysfs is incomplete."""
    root = Path(root)
    if cpus is None:
        cpus = sorted(os.sched_getaffinity(0))
    if not cpus:
        raise TopologyError("no processing units available")
    machine = TopoNode("machine", 0)
    for cpu in cpus:
        node = machine
        for kind, index in _pu_path(root, cpu):
            node = node.child(kind, index)
    machine.sort()
    return machine


def tree_from_shape(packages: int, cores: int, pus: int) -> TopoNode:
    """Regular synthetic machine, PUs numbered in DFS order."""
    machine = TopoNode("machine", 0)
    n = 0
    for p in range(packages):
        pk = machine.child("package", p)
        for c in range(cores):
            core = pk.child("core", p * cores + c)
            for _ in range(pus):
                core.child("pu", n)
                n += 1
    return machine


def pu_order(root=SYSFS_CPU, cpus=None) -> list[int]:
    return dfs_leaves(read_topology(root, cpus))
