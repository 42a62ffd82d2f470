# # Quasi-distance transform
#
# The quasi-distance records, for every pixel, how many erosions it takes
# before the pixel drops the most. Flat bright regions get large values,
# fine texture small ones. A second pass lowers values until neighbours
# differ by at most one.

import numpy as np

import geomorph as gm
from geomorph import oracle

f = np.zeros((40, 60), np.uint8)
f[5:35, 5:25] = 200   # wide block
f[10:20, 35:40] = 120  # narrow bar
f[30:32, 40:58] = 90   # thin line

d, r, stages = gm.quasi_distance(f, return_residual=True)
print("stages:", stages)
print("distance at block centre:", d[20, 15], " bar:", d[15, 37], " line:", d[31, 50])
print("largest residual on the block:", r[20, 15])

# After the second pass the map is 1-Lipschitz for the 8-neighbourhood.

print("max d - erode(d):", int((d.astype(int) - oracle.naive_erode(d, 1)).max()))

# A coarse text rendering of the distance map.

for row in d[::4]:
    print("".join(" .:-=+*#%@"[min(v, 9)] for v in row[::2]))
