"""Command-line front end.

    geomorph hmax --h 10 in.pgm out.pgm
    geomorph granulometry --max-size 8 in.pgm sizes.csv
    geomorph bench --sweep width --report csv

Output images use the input's format (PGM or GMS1). Thread count and
pinning default to $GEOMORPH_THREADS and $GEOMORPH_PIN; flags win.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import itertools
import json
import os
import statistics
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from . import oracle
from .image import ElementType, Image
from .io import ImageFormatError, format_of, load, store_pgm, store_raw
from .kernel import LANE_CHOICES, KernelKind
from .pipeline import ENV_PIN, ENV_THREADS, FilterTask, Pipeline, PinningMap

WIDTH_SWEEP = (128, 256, 512, 1024, 2048, 4096)
CHAIN_SWEEP = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    dtype: str | None = None
    threads: int | None = None
    pinning: str | None = None
    lanes: int | None = None
    h: float | None = None
    size: int | None = None
    max_size: int | None = None
    report: str = "text"
    oracle: bool = False
    # bench axes
    chains: list[int] = field(default_factory=lambda: [512])
    thread_list: list[int] = field(default_factory=list)
    dtypes: list[str] = field(default_factory=lambda: ["U8"])
    widths: list[int] = field(default_factory=lambda: [1024])
    heights: list[int] = field(default_factory=lambda: [1024])
    lane_list: list[int | None] = field(default_factory=lambda: [None])
    repetitions: int = 5
    warmup: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.threads is not None and self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if self.command == "bench":
            if self.repetitions < 1:
                raise ConfigError("--repetitions must be >= 1")
            if self.warmup < 0:
                raise ConfigError("--warmup must be >= 0")
            if any(c < 1 for c in self.chains):
                raise ConfigError("chain length must be >= 1")
            if any(t < 1 for t in self.thread_list):
                raise ConfigError("thread counts must be >= 1")
            if any(n < 1 for n in self.widths + self.heights):
                raise ConfigError("dimensions must be >= 1")
            for d in self.dtypes:
                ElementType.parse(d)


# --- argument parsing ------------------------------------------------------------

def _lanes(text: str):
    if text.lower() in ("max", "auto"):
        return None
    n = int(text)
    if n not in LANE_CHOICES:
        raise argparse.ArgumentTypeError(f"lanes must be one of {LANE_CHOICES} or 'max'")
    return n


def _elem(text: str) -> str:
    try:
        return ElementType.parse(text).tag
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"unknown element type {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", "-T", type=int, help=f"worker threads (default ${ENV_THREADS} or all PUs)")
    p.add_argument("--pin", dest="pinning", help=f"auto, none or a PU list like 0,2,4 (default ${ENV_PIN} or auto)")
    p.add_argument("--lanes", type=_lanes, help="elements per step, or 'max'; 1 forces the scalar path")
    p.add_argument("--report", choices=("text", "csv", "json"), default="text")


def _io_args(p, dtype=True):
    p.add_argument("input")
    p.add_argument("output")
    if dtype:
        p.add_argument("--dtype", type=_elem, help="convert the input to this element type first")
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geomorph", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("erode", "dilate"):
        p = sub.add_parser(name, help=f"{name} by the (2s+1) square")
        _io_args(p)
        p.add_argument("--size", "-s", type=int, required=True)
        _common(p)
    for name in ("hmax", "dome"):
        p = sub.add_parser(name, help="H-maxima" if name == "hmax" else "top-hat of H-maxima")
        _io_args(p)
        p.add_argument("--h", type=float, required=True)
        _common(p)
    for name, text in (("hfill", "fill holes"), ("raobj", "remove border objects")):
        p = sub.add_parser(name, help=text)
        _io_args(p)
        _common(p)
    p = sub.add_parser("openrec", help="opening by reconstruction")
    _io_args(p)
    p.add_argument("--size", "-s", type=int, required=True)
    _common(p)
    p = sub.add_parser("qdt", help="quasi-distance transform (writes U16)")
    _io_args(p)
    _common(p)
    p = sub.add_parser("granulometry", help="granulometric curve as CSV s,G,PS")
    _io_args(p)
    p.add_argument("--max-size", "-S", type=int, required=True)
    _common(p)
    p = sub.add_parser("asf", help="alternating sequential filter")
    _io_args(p)
    p.add_argument("--max-size", "-S", type=int, required=True)
    _common(p)

    p = sub.add_parser("bench", help="time chains of 3x3 erosions")
    p.add_argument("--input", help="image file (default: random image)")
    p.add_argument("--sweep", choices=("none", "chain", "width", "height"), default="none",
                   help="preset axes; explicit axis flags override")
    p.add_argument("--chain", type=int, nargs="+", dest="chains")
    p.add_argument("--threads", "-T", type=int, nargs="+", dest="thread_list")
    p.add_argument("--dtype", type=_elem, nargs="+", dest="dtypes")
    p.add_argument("--width", type=int, nargs="+", dest="widths")
    p.add_argument("--height", type=int, nargs="+", dest="heights")
    p.add_argument("--lanes", type=_lanes, nargs="+", dest="lane_list")
    p.add_argument("--pin", dest="pinning")
    p.add_argument("--repetitions", "-r", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--report", choices=("text", "csv", "json"), default="text")
    return parser


def _all_pus() -> int:
    return len(os.sched_getaffinity(0))


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.command)
    for key in ("input", "output", "dtype", "pinning", "h", "size", "max_size",
                "report", "oracle", "repetitions", "warmup", "seed"):
        if getattr(ns, key, None) is not None:
            setattr(cfg, key, getattr(ns, key))
    if ns.command == "bench":
        _bench_axes(cfg, ns)
    else:
        cfg.threads = ns.threads
        cfg.lanes = ns.lanes
    cfg.validate()
    return cfg


def _bench_axes(cfg: RunConfig, ns) -> None:
    pus = _all_pus()
    threads = sorted({1, *[t for t in (2, 4, 8, 16, 32, 64) if t <= pus], pus})
    if ns.sweep == "chain":
        cfg.chains = list(CHAIN_SWEEP)
        cfg.thread_list = threads
        cfg.dtypes = [e.tag for e in ElementType]
    elif ns.sweep == "width":
        cfg.widths, cfg.heights = list(WIDTH_SWEEP), [128]
        cfg.thread_list = threads
    elif ns.sweep == "height":
        cfg.widths, cfg.heights = [128], list(WIDTH_SWEEP)
        cfg.thread_list = threads
    for key in ("chains", "thread_list", "dtypes", "widths", "heights", "lane_list"):
        value = getattr(ns, key, None)
        if value is not None:
            setattr(cfg, key, list(value))
    if not cfg.thread_list:
        env = os.environ.get(ENV_THREADS)
        cfg.thread_list = [int(env)] if env else [pus]


# --- operator commands -------------------------------------------------------------

def _load_input(cfg: RunConfig) -> tuple[Image, str]:
    family = format_of(cfg.input)
    img = load(cfg.input)
    if cfg.dtype and cfg.dtype != img.elem.tag:
        img = Image.from_array(img.to_array().astype(ElementType.parse(cfg.dtype).dtype))
    return img, family


def _store(img: Image, path: str, family: str) -> None:
    if family == "pgm":
        store_pgm(img, path)
    else:
        store_raw(img, path)


def _check_param(img: Image, name: str, value) -> None:
    if value is None:
        raise ConfigError(f"--{name} is required")
    if not img.elem.is_float and value != int(value):
        raise ConfigError(f"--{name}={value} is not an integer value for {img.elem.tag}")


def _oracle_for(cfg: RunConfig, a: np.ndarray):
    c = cfg.command
    if c == "erode":
        return oracle.naive_erode(a, cfg.size)
    if c == "dilate":
        return oracle.naive_dilate(a, cfg.size)
    if c == "hmax":
        return oracle.naive_hmax(a, cfg.h if a.dtype.kind == "f" else int(cfg.h))
    if c == "dome":
        return oracle.naive_dome(a, cfg.h if a.dtype.kind == "f" else int(cfg.h))
    if c == "hfill":
        return oracle.naive_hfill(a)
    if c == "raobj":
        return oracle.naive_raobj(a)
    if c == "openrec":
        return oracle.naive_open_by_reconstruction(a, cfg.size)
    if c == "qdt":
        return oracle.naive_qdt(a)[0]
    if c == "asf":
        return oracle.naive_asf(a, cfg.max_size)
    if c == "granulometry":
        return oracle.naive_granulometry(a, cfg.max_size)
    raise ConfigError(f"no oracle for {c}")


def _apply(cfg: RunConfig, img: Image, pipe: Pipeline):
    c = cfg.command
    if c in ("erode", "dilate"):
        if cfg.size is None or cfg.size < 0:
            raise ConfigError("--size must be >= 0")
        fn = ops.erode_s if c == "erode" else ops.dilate_s
        return fn(img, cfg.size, pipe, report=True)
    if c in ("hmax", "dome"):
        _check_param(img, "h", cfg.h)
        h = cfg.h if img.elem.is_float else int(cfg.h)
        fn = ops.hmax if c == "hmax" else ops.dome
        return fn(img, h, pipe, report=True)
    if c == "hfill":
        return ops.hfill(img, pipe, report=True)
    if c == "raobj":
        return ops.raobj(img, pipe, report=True)
    if c == "openrec":
        if cfg.size is None or cfg.size < 1:
            raise ConfigError("--size must be >= 1")
        return ops.open_by_reconstruction(img, cfg.size, pipe, report=True)
    if c == "qdt":
        d, n = ops.quasi_distance(img, pipe)
        return ops.OperatorResult(d, n, True)
    if c == "asf":
        if cfg.max_size is None or cfg.max_size < 1:
            raise ConfigError("--max-size must be >= 1")
        return ops.asf(img, cfg.max_size, pipe, report=True)
    raise ConfigError(f"unknown command {c}")


def _write_granulometry(res: ops.GranulometryResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "G", "PS"])
        for s in res.sizes:
            ps = res.PS[s] if s < len(res.PS) else ""
            w.writerow([int(s), _num(res.G[s]), _num(ps) if ps != "" else ""])


def _num(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return int(v)


def _emit(row: dict, fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        print(json.dumps(row), file=out)
    elif fmt == "csv":
        w = csv.DictWriter(out, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)
    else:
        print(" ".join(f"{k}={v}" for k, v in row.items()), file=out)


def run_operator(cfg: RunConfig) -> int:
    img, family = _load_input(cfg)
    pipe = Pipeline(cfg.threads, cfg.pinning, cfg.lanes)
    try:
        start = time.perf_counter()
        if cfg.command == "granulometry":
            if cfg.max_size is None or cfg.max_size < 1:
                raise ConfigError("--max-size must be >= 1")
            res = ops.granulometry(img, cfg.max_size, pipe)
            elapsed = time.perf_counter() - start
            _write_granulometry(res, cfg.output)
            iterations, converged, out_arr = 2 * sum(range(cfg.max_size + 1)), None, None
            if cfg.oracle:
                G, PS = _oracle_for(cfg, img.to_array())
                match = np.array_equal(G, res.G) and np.array_equal(PS, res.PS)
        else:
            res = _apply(cfg, img, pipe)
            elapsed = time.perf_counter() - start
            _store(res.image, cfg.output, family)
            iterations, converged = res.iterations, res.converged
            if cfg.oracle:
                match = np.array_equal(_oracle_for(cfg, img.to_array()), res.image.to_array())
    finally:
        pipe.close()
    row = {"command": cfg.command, "width": img.width, "height": img.height,
           "dtype": img.elem.tag, "threads": pipe.threads, "iterations": iterations,
           "converged": converged, "time_s": round(elapsed, 6)}
    if cfg.oracle:
        row["oracle"] = "match" if match else "MISMATCH"
    _emit(row, cfg.report)
    return 0 if not cfg.oracle or match else 3


# --- bench -------------------------------------------------------------------------

BENCH_FIELDS = ("command", "width", "height", "dtype", "threads", "lanes", "pinning",
                "chain", "repetitions", "median_s", "min_s", "max_s", "spread_s",
                "mpx_stages_per_s", "speedup")


def _bench_image(cfg: RunConfig, width, height, dtype, rng) -> Image:
    elem = ElementType.parse(dtype)
    if cfg.input:
        base = load(cfg.input).to_array()
        reps = (-(-height // base.shape[0]), -(-width // base.shape[1]))
        a = np.tile(base, reps)[:height, :width].astype(elem.dtype)
        return Image.from_array(a)
    if elem.is_float:
        a = rng.random((height, width)) * 255
    else:
        a = rng.integers(0, 256, (height, width))
    return Image.from_array(a.astype(elem.dtype))


def _time_chain(pipe: Pipeline, img: Image, chain: int, cfg: RunConfig) -> list[float]:
    times = []
    for k in range(cfg.warmup + cfg.repetitions):
        work = img.copy()
        tasks = [FilterTask(KernelKind.ERODE3X3) for _ in range(chain)]
        t0 = time.perf_counter()
        pipe.run_chain(work, tasks)
        dt = time.perf_counter() - t0
        if k >= cfg.warmup:
            times.append(dt)
    return times


def bench(cfg: RunConfig, progress=None) -> list[dict]:
    """Run every point of the configured sweep and return one row each."""
    rng = np.random.default_rng(cfg.seed)
    rows = []
    pin = PinningMap.parse(cfg.pinning)
    for T, lanes in itertools.product(cfg.thread_list, cfg.lane_list):
        with Pipeline(T, pin, lanes) as pipe:
            for dtype, w, h in itertools.product(cfg.dtypes, cfg.widths, cfg.heights):
                img = _bench_image(cfg, w, h, dtype, rng)
                for chain in cfg.chains:
                    times = _time_chain(pipe, img, chain, cfg)
                    med = statistics.median(times)
                    row = {
                        "command": "bench", "width": w, "height": h, "dtype": img.elem.tag,
                        "threads": T, "lanes": "max" if lanes is None else lanes,
                        "pinning": pin.mode, "chain": chain, "repetitions": cfg.repetitions,
                        "median_s": med, "min_s": min(times), "max_s": max(times),
                        "spread_s": max(times) - min(times),
                        "mpx_stages_per_s": w * h * chain / med / 1e6, "speedup": None,
                    }
                    rows.append(row)
                    if progress:
                        progress(row)
    _speedups(rows)
    return rows


def _speedups(rows: list[dict]) -> None:
    key = lambda r: (r["width"], r["height"], r["dtype"], r["lanes"], r["chain"])
    base = {key(r): r["median_s"] for r in rows if r["threads"] == 1}
    for r in rows:
        t1 = base.get(key(r))
        r["speedup"] = None if t1 is None else t1 / r["median_s"]


def format_rows(rows: list[dict], fmt: str) -> str:
    buf = _io.StringIO()
    if fmt == "json":
        json.dump(rows, buf, indent=1)
        buf.write("\n")
    elif fmt == "csv":
        w = csv.DictWriter(buf, fieldnames=BENCH_FIELDS)
        w.writeheader()
        w.writerows(rows)
    else:
        head = ("dtype", "width", "height", "threads", "lanes", "chain", "median_s",
                "spread_s", "mpx_stages_per_s", "speedup")
        buf.write(" ".join(f"{h:>16}" for h in head) + "\n")
        for r in rows:
            cells = []
            for h in head:
                v = r[h]
                cells.append(f"{v:>16.6g}" if isinstance(v, float) else f"{str(v):>16}")
            buf.write(" ".join(cells) + "\n")
    return buf.getvalue()


def run_bench(cfg: RunConfig) -> int:
    rows = bench(cfg)
    text = format_rows(rows, cfg.report)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def run(cfg: RunConfig) -> int:
    if cfg.command == "bench":
        return run_bench(cfg)
    return run_operator(cfg)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return run(config_from_args(ns))
    except (ConfigError, ImageFormatError, OSError, ValueError, TypeError) as exc:
        print(f"geomorph {ns.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
