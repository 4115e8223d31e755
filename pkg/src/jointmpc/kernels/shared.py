"""Constants shared by both kernel backends.

Numba freezes module globals at compile time, so both backends read the
same values and stay numerically interchangeable.
"""

# Re-orthonormalize composed rotations every this many joint compositions.
REORTHO_EVERY = 8

# Newton iterations for the polar orthonormalization step.
POLAR_ITERS = 2

# Ternary-search iterations for segment/box distance. (2/3)^60 ~ 3e-11
# interval shrinkage, far below any collision margin we care about.
TERNARY_ITERS = 60

# Squared-length threshold below which a segment is treated as a point.
SEG_EPS = 1e-12

# Self-collision value reported for a chain with no collision pairs.
NO_CONTACT = -1.0e30
