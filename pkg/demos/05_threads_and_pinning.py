# # Threads, pinning and vector lanes
#
# Stage j of a chain runs on worker (j-1) mod T. Workers can be pinned to
# processing units in topology order, so neighbouring stages share caches.

import os
import time

import numpy as np

import geomorph as gm
from geomorph import topology

print("processing units available:", sorted(os.sched_getaffinity(0)))
try:
    print("depth-first PU order:", topology.pu_order())
except topology.TopologyError as exc:
    print("no sysfs topology:", exc)

print("auto pinning for 4 workers:", gm.PinningMap.parse("auto").assign(4))
print("explicit pinning:", gm.PinningMap.parse("0,0,0").assign(3))

# The vector path and the scalar path give the same bytes; only the speed
# differs.

rng = np.random.default_rng(0)
img = gm.Image.from_array(rng.integers(0, 256, (512, 512)).astype(np.uint8))
chain = [gm.FilterTask(gm.KernelKind.ERODE3X3) for _ in range(64)]

outputs = {}
for lanes in (1, None):
    with gm.Pipeline(threads=1, lanes=lanes) as pipe:
        pipe.run_chain(img.copy(), chain)   # warm up
        work = img.copy()
        t0 = time.perf_counter()
        pipe.run_chain(work, chain)
        name = "scalar" if lanes == 1 else "vector"
        print(f"{name}: {time.perf_counter() - t0:.3f} s")
        outputs[name] = work.to_array()
print("identical:", np.array_equal(outputs["scalar"], outputs["vector"]))
