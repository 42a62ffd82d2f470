# # Chains of 3x3 stages
#
# A large square erosion is the same thing as a run of small ones: eroding
# s times by the 3x3 square equals one erosion by the (2s+1) square.
# geomorph runs such a run as a pipeline in which every stage works in
# place on the same buffer, one row behind the stage before it.

import numpy as np

import geomorph as gm
from geomorph import oracle

rng = np.random.default_rng(3)
f = rng.integers(0, 256, (96, 128)).astype(np.uint8)

# Erode by the 11x11 square, as five chained 3x3 stages.

e5 = gm.erode_s(f, 5)
print("min/max before:", f.min(), f.max(), " after:", e5.min(), e5.max())

# The sliding-window oracle computes the same thing directly.

print("matches the 11x11 window:", np.array_equal(e5, oracle.naive_erode(f, 5)))

# Operators accept Image objects too. An Image owns a padded, aligned
# buffer; `data` is a view of the pixels.

img = gm.Image.from_array(f)
print(img.width, img.height, img.elem.tag, "row stride", img.stride, "elements")

# A chain can mix kinds. Here is an opening followed by a closing, both of
# size 2, in a single pipeline pass.

E, D = gm.KernelKind.ERODE3X3, gm.KernelKind.DILATE3X3
with gm.Pipeline(threads=4, pinning="none") as pipe:
    work = img.copy()
    report = pipe.run_chain(work, [gm.FilterTask(k) for k in [E, E, D, D, D, D, E, E]])
    print("stages:", report.iterations, "workers:", report.workers_used,
          "row cache per stage:", sorted(set(report.stage_aux_elements)))

# The result does not depend on the thread count.

with gm.Pipeline(threads=1) as pipe:
    again = img.copy()
    pipe.run_chain(again, [gm.FilterTask(k) for k in [E, E, D, D, D, D, E, E]])
print("T=4 and T=1 agree:", np.array_equal(work.to_array(), again.to_array()))
