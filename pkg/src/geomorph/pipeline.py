"""Filter-chain executor.

A pool of ``T`` long-lived workers, each with its own task queue and row
cache. Stage ``j`` of a chain goes to worker ``(j - 1) mod T``, so
consecutive stages run on neighbouring workers and a chain of length ``n``
keeps ``min(n, T)`` of them busy at once. Stages talk to each other only
through per-instance row counters (see :mod:`geomorph.kernel`).

A convergent stage that still changed something is put back at the front
of its worker's queue as stage ``j + T``. Its gate then watches the stage
that was ``T - 1`` positions ahead of it, i.e. the chain's current tail,
so ``T`` convergent stages keep cycling until one full sweep changes
nothing.
"""

from __future__ import annotations

import collections
import logging
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .image import Image
from .kernel import ABORTED, KernelKind, LaneConfig, QdtState, RowCache
from .topology import TopologyError, pu_order

log = logging.getLogger(__name__)

ENV_THREADS = "GEOMORPH_THREADS"
ENV_PIN = "GEOMORPH_PIN"


class PipelineError(RuntimeError):
    """A stage failed; the image the chain was working on is invalid."""


def row_gate(j: int, row: int, height: int, published: int) -> bool:
    """Whether stage ``j`` may produce output row ``row`` once its
    predecessor has published ``published`` rows."""
    if j <= 1:
        return True
    return published >= min(row + 2, height)


def assigned_worker(j: int, threads: int) -> int:
    """0-based worker index running stage ``j``."""
    return (j - 1) % threads


# --- pinning ---------------------------------------------------------------

class PinningMap:
    """Which processing unit each worker is bound to.

    ``auto`` uses the DFS leaf order of the machine topology (falling back
    to ``0..T-1`` if the topology cannot be read) and wraps around when
    there are more workers than PUs. ``none`` leaves threads unbound.
    An explicit list must have at least one entry per worker.
    """

    def __init__(self, mode: str = "auto", pus=None):
        if mode not in ("auto", "none", "explicit"):
            raise ValueError(f"unknown pinning mode {mode!r}")
        self.mode = mode
        self.fallback = False
        if mode == "auto" and pus is None:
            try:
                pus = pu_order()
            except (TopologyError, OSError, ValueError) as exc:
                log.info("topology query failed (%s), pinning sequentially", exc)
                pus = None
                self.fallback = True
        if mode == "explicit" and not pus:
            raise ValueError("explicit pinning needs at least one PU")
        self.pus = None if pus is None else [int(p) for p in pus]

    @classmethod
    def parse(cls, value) -> "PinningMap":
        if isinstance(value, PinningMap):
            return value
        if value is None:
            value = os.environ.get(ENV_PIN, "auto")
        if isinstance(value, (list, tuple)):
            return cls("explicit", value)
        value = str(value).strip().lower()
        if value in ("auto", "none"):
            return cls(value)
        try:
            return cls("explicit", [int(p) for p in value.split(",") if p.strip()])
        except ValueError:
            raise ValueError(f"pinning must be auto, none or a PU list, got {value!r}") from None

    def assign(self, threads: int) -> list[int | None]:
        if self.mode == "none":
            return [None] * threads
        if self.mode == "explicit":
            if threads > len(self.pus):
                raise ValueError(f"{threads} workers but only {len(self.pus)} PUs listed")
            return self.pus[:threads]
        if self.pus is None:
            return list(range(threads))
        return [self.pus[t % len(self.pus)] for t in range(threads)]

    def __repr__(self):
        return f"PinningMap({self.mode!r}, {self.pus})"


@dataclass(frozen=True)
class PipelinePlan:
    threads: int
    pinning: PinningMap
    lanes: LaneConfig | None = None

    def worker_for(self, j: int) -> int:
        return assigned_worker(j, self.threads)

    def pin_targets(self) -> list[int | None]:
        return self.pinning.assign(self.threads)


# --- tasks and queues --------------------------------------------------------

@dataclass(eq=False)
class FilterTask:
    """One stage of a chain.

    ``requeue`` marks a convergent stage that re-runs as ``j + T`` while it
    keeps changing the image; ``limit`` caps the stage index it may reach.
    ``j`` and ``counter`` are filled in when the chain is enqueued.
    """

    kind: KernelKind
    mask: Image | None = None
    qdt: QdtState | None = None
    requeue: bool = False
    limit: int | None = None
    j: int = 0
    counter: np.ndarray | None = None
    run: "ChainRun | None" = field(default=None, repr=False)

    def advanced(self, step: int, counter) -> "FilterTask":
        return FilterTask(self.kind, self.mask, self.qdt, self.requeue, self.limit,
                          self.j + step, counter, self.run)


class WorkerQueue:
    """FIFO of tasks with front insertion. The owner blocks in ``take``
    while it is empty."""

    def __init__(self, owner: int):
        self.owner = owner
        self._items = collections.deque()
        self._cond = threading.Condition()
        self._closed = False

    def push_back(self, task) -> None:
        with self._cond:
            self._items.append(task)
            self._cond.notify()

    def push_front(self, task) -> None:
        with self._cond:
            self._items.appendleft(task)
            self._cond.notify()

    def take(self):
        """Next task, or None once the queue is closed and drained."""
        with self._cond:
            while not self._items and not self._closed:
                self._cond.wait()
            return self._items.popleft() if self._items else None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __len__(self):
        with self._cond:
            return len(self._items)


# --- chain state -------------------------------------------------------------

@dataclass
class ChainReport:
    iterations: int = 0
    requeues: int = 0
    converged: bool | None = None
    elapsed: float = 0.0
    # elements held by the row caches of each stage instance
    stage_aux_elements: list[int] = field(default_factory=list)
    workers_used: set[int] = field(default_factory=set)
    total_aux_elements: int = 0
    gate_violations: int = 0


class ChainRun:
    """Bookkeeping for one chain in flight."""

    def __init__(self, pipeline: "Pipeline", image: Image, validate: bool):
        self.pipeline = pipeline
        self.image = image
        self.height = image.height
        self.validate = validate
        self.abort = np.zeros(1, np.int64)
        self.report = ChainReport()
        self.error: BaseException | None = None
        self._counters: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self._pending = 0
        self._done = threading.Event()
        self._head = kernel.full_counter(image.height)

    def counter(self, j: int) -> np.ndarray:
        """Row counter of stage instance ``j``. A requeued instance can
        start before the instance it waits on has been created, so
        counters are made on first use by either side."""
        if j < 1:
            return self._head
        with self._lock:
            c = self._counters.get(j)
            if c is None:
                c = self._counters[j] = np.zeros(1, np.int64)
            return c

    def add_pending(self, n: int) -> None:
        with self._lock:
            self._pending += n
            if self._pending == 0:
                self._done.set()

    def fail(self, exc: BaseException) -> None:
        with self._lock:
            if self.error is None:
                self.error = exc
        self.abort[0] = 1

    def finish_stage(self, task: FilterTask, status: int, aux: int, worker: int,
                     violations: int, requeued: bool) -> None:
        with self._lock:
            r = self.report
            r.iterations += 1
            r.stage_aux_elements.append(aux)
            r.workers_used.add(worker)
            r.gate_violations += violations
            if requeued:
                r.requeues += 1
            if task.requeue:
                # a convergent stage that stopped while still changing the
                # image ran into its limit
                settled = status == 0 or (status == 1 and requeued)
                r.converged = settled if r.converged is None else r.converged and settled

    def wait(self) -> ChainReport:
        self._done.wait()
        return self.report


# --- workers -----------------------------------------------------------------

class _Worker:
    def __init__(self, pipeline: "Pipeline", index: int, pu: int | None):
        self.pipeline = pipeline
        self.index = index
        self.pu = pu
        self.pinned = False
        self.pin_error: str | None = None
        self.queue = WorkerQueue(index)
        self.cache = RowCache()
        self.thread = threading.Thread(target=self._loop, name=f"geomorph-{index}",
                                       daemon=True)

    def _pin(self) -> None:
        if self.pu is None:
            return
        try:
            # pid 0 binds the calling thread only
            os.sched_setaffinity(0, {self.pu})
            self.pinned = True
        except OSError as exc:
            self.pin_error = str(exc)
            log.warning("worker %d: cannot pin to PU %d: %s", self.index, self.pu, exc)

    def _loop(self) -> None:
        self._pin()
        while True:
            task = self.queue.take()
            if task is None:
                return
            self._execute(task)

    def _execute(self, task: FilterTask) -> None:
        run = task.run
        status = ABORTED
        violations = 0
        if not run.abort[0]:
            row_log = np.full(run.height, -1, np.int64) if run.validate else None
            try:
                status = kernel.run_stage(
                    task.kind, run.image, mask=task.mask, qdt=task.qdt, j=task.j,
                    lanes=self.pipeline.plan.lanes, pred=run.counter(task.j - 1),
                    own=task.counter, cache=self.cache, abort=run.abort, log=row_log)
            except BaseException as exc:  # surfaced to the caller
                run.fail(exc)
                status = ABORTED
            if row_log is not None and status != ABORTED and task.j > 1:
                need = np.minimum(np.arange(run.height) + 2, run.height)
                violations = int(np.count_nonzero(row_log < need))
        step = self.pipeline.threads
        requeued = (status == 1 and task.requeue
                    and (task.limit is None or task.j + step <= task.limit))
        run.finish_stage(task, status, self.cache.elements, self.index, violations, requeued)
        if requeued:
            self.queue.push_front(task.advanced(step, run.counter(task.j + step)))
        else:
            run.add_pending(-1)


class Pipeline:
    """Thread pool executing filter chains in place."""

    def __init__(self, threads: int | None = None, pinning=None, lanes=None):
        threads = default_threads() if threads is None else int(threads)
        if threads < 1:
            raise ValueError(f"thread count must be >= 1, got {threads}")
        pin = PinningMap.parse(pinning)
        self.plan = PipelinePlan(threads, pin, None if lanes is None else LaneConfig.resolve(lanes, None))
        targets = self.plan.pin_targets()
        self.workers = [_Worker(self, t, targets[t]) for t in range(threads)]
        for w in self.workers:
            w.thread.start()
        self._closed = False
        self._busy = threading.Lock()

    @property
    def threads(self) -> int:
        return self.plan.threads

    @property
    def pinning(self) -> PinningMap:
        return self.plan.pinning

    @property
    def lanes(self) -> LaneConfig | None:
        return self.plan.lanes

    def enqueue_chain(self, image: Image, tasks, validate: bool = False) -> ChainRun:
        """Hand stages ``1..n`` of a chain to the workers; returns at once."""
        if self._closed:
            raise RuntimeError("pipeline is closed")
        run = ChainRun(self, image, validate)
        tasks = list(tasks)
        if not tasks:
            run.add_pending(0)
            return run
        run.add_pending(len(tasks))
        for j, task in enumerate(tasks, start=1):
            task.j = j
            task.counter = run.counter(j)
            task.run = run
        for task in tasks:
            self.workers[self.plan.worker_for(task.j)].queue.push_back(task)
        return run

    def run_chain(self, image: Image, tasks, validate: bool = False) -> ChainReport:
        """Run a chain to completion on ``image`` in place."""
        with self._busy:
            start = time.perf_counter()
            run = self.enqueue_chain(image, tasks, validate)
            try:
                report = run.wait()
            except BaseException:
                run.fail(KeyboardInterrupt())
                run.wait()
                raise
            report.elapsed = time.perf_counter() - start
            report.total_aux_elements = sum(
                self.workers[t].cache.elements for t in report.workers_used)
            if run.error is not None:
                raise PipelineError(f"stage failed: {run.error}") from run.error
            return report

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for w in self.workers:
            w.queue.close()
        for w in self.workers:
            w.thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __repr__(self):
        return f"Pipeline(threads={self.threads}, pinning={self.pinning.mode})"


def default_threads() -> int:
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"{ENV_THREADS} must be >= 1, got {n}")
        return n
    return len(os.sched_getaffinity(0))


def build_pool(threads: int | None = None, pinning=None, lanes=None) -> Pipeline:
    return Pipeline(threads, pinning, lanes)


def enqueue_chain(pipeline: Pipeline, tasks, image: Image, validate: bool = False) -> ChainRun:
    return pipeline.enqueue_chain(image, tasks, validate)


def run_chain(pipeline: Pipeline, chain, image: Image, validate: bool = False) -> ChainReport:
    return pipeline.run_chain(image, chain, validate)


_default: dict[tuple, Pipeline] = {}
_default_lock = threading.Lock()


def shared_pipeline(threads=None, pinning=None, lanes=None) -> Pipeline:
    """A process-wide pipeline per configuration, created on first use."""
    threads = default_threads() if threads is None else int(threads)
    pin = PinningMap.parse(pinning)
    key = (threads, pin.mode, None if pin.pus is None else tuple(pin.pus),
           None if lanes is None else LaneConfig.resolve(lanes, None).lanes)
    with _default_lock:
        p = _default.get(key)
        if p is None:
            p = _default[key] = Pipeline(threads, pin, lanes)
        return p
