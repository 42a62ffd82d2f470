# # Size distributions
#
# The granulometric curve sums the image after openings of growing size;
# the pattern spectrum is the drop between consecutive sizes. A peak at s
# means many bright structures whose width is about 2s+1.

import numpy as np

import geomorph as gm

rng = np.random.default_rng(7)
f = np.zeros((128, 128), np.uint8)
for _ in range(40):
    y, x = rng.integers(0, 120, 2)
    f[y:y + 5, x:x + 5] = 255   # squares of width 5

g = gm.granulometry(f, 4)
for s, G, PS in zip(g.sizes, g.G, list(g.PS) + [None]):
    print(f"s={s}  G={G:>8}  PS={'' if PS is None else PS}")

# Squares of width 5 survive the opening of size 2 and vanish at size 3.

print("peak at s =", int(np.argmax(g.PS)))

# The alternating sequential filter smooths noise with openings and
# closings of sizes 1..S.

noisy = f.copy()
noisy[rng.random(f.shape) < 0.02] = 255
clean = gm.asf(noisy, 2)
print("isolated bright pixels removed:", int((noisy > clean).sum()))
