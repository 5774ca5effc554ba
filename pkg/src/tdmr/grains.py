"""Four-rectangular-grain discrete grain model.

Grain images are stored as ``uint8`` label arrays with the codes below.  The
medium is tiled by 1x1 (A), 2x1 vertical (B over C), 1x2 horizontal (D left of
E) and 2x2 grains (F top-left, G below F, H right of F, I below H).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

LABELS = "ABCDEFGHI"
A, B, C, D, E, F, G, H, I = range(9)

# (dm, dn) from each subgrain to the last-written subgrain of its grain
_LAST_OFFSET = {
    A: (0, 0), B: (1, 0), C: (0, 0), D: (0, 1), E: (0, 0),
    F: (1, 1), G: (0, 1), H: (1, 0), I: (0, 0),
}

SUBIMAGE = 16
SUBIMAGE_POOL = 1024
GREEDY_MAX_P2 = 0.36
MAX_RETRIES = 100
DECISION_BUDGET = 20  # random decisions allowed per cell before a retry


@dataclass(frozen=True)
class GrainDistribution:
    """Probabilities of the 1x1, 2x1, 1x2 and 2x2 grain types (per grain)."""

    p1: float
    p2: float
    p3: float
    p4: float

    def __post_init__(self):
        probs = self.as_array()
        if np.any(probs < -1e-12):
            raise ValueError(f"negative grain probability in {self}")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"grain probabilities sum to {probs.sum()}, not 1")
        if abs(self.p2 - self.p3) > 1e-12:
            raise ValueError("p2 and p3 must be equal")
        if abs(self.cells_per_grain - 2.0) > 1e-12:
            raise ValueError("distribution must average two cells per grain")

    @property
    def cells_per_grain(self) -> float:
        return self.p1 + 2 * self.p2 + 2 * self.p3 + 4 * self.p4

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3, self.p4])


def solve_grain_distribution(p2: float) -> GrainDistribution:
    """Solve the sum-to-one and two-cells-per-grain constraints with p3 = p2."""
    if not 0.0 <= p2 <= 0.5:
        raise ValueError(f"p2 must lie in [0, 0.5], got {p2}")
    p4 = (1.0 - 2.0 * p2) / 3.0
    p1 = 2.0 * (1.0 - 2.0 * p2) / 3.0
    return GrainDistribution(p1, p2, p2, p4)


@dataclass(frozen=True, eq=False)
class GrainImage:
    cells: np.ndarray  # (rows, cols) uint8 label codes

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    def to_text(self) -> str:
        return "\n".join("".join(LABELS[v] for v in row) for row in self.cells) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GrainImage":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        cells = np.array([[LABELS.index(ch) for ch in ln] for ln in lines], dtype=np.uint8)
        image = cls(cells)
        check_grain_image(image)
        return image

    def grain_counts(self) -> np.ndarray:
        """Number of 1x1, 2x1, 1x2 and 2x2 grains."""
        counts = np.bincount(self.cells.ravel(), minlength=9)
        return np.array([counts[A], counts[B], counts[D], counts[F]])

    def grain_frequencies(self) -> np.ndarray:
        counts = self.grain_counts()
        return counts / counts.sum()


@dataclass(frozen=True, eq=False)
class WrittenImage:
    values: np.ndarray  # (rows, cols) int8 in {-1, +1}; the frame outside is -1

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def framed(self) -> np.ndarray:
        """Values with the one-cell frame of -1 A grains around them."""
        return np.pad(self.values, 1, constant_values=-1)

    def to_text(self) -> str:
        return "\n".join("".join("+" if v > 0 else "-" for v in row) for row in self.values) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WrittenImage":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        values = np.array([[1 if ch == "+" else -1 for ch in ln] for ln in lines], dtype=np.int8)
        return cls(values)


def grain_violations(cells: np.ndarray) -> int:
    """Count cells whose label disagrees with its grain partners.

    A frame of A is assumed around the array, so any grain crossing the edge
    is a violation.
    """
    lab = np.pad(cells, 1, constant_values=A)
    c = lab[1:-1, 1:-1]
    up, down = lab[:-2, 1:-1], lab[2:, 1:-1]
    left, right = lab[1:-1, :-2], lab[1:-1, 2:]
    bad = np.zeros(c.shape, dtype=bool)
    bad |= (c == B) & (down != C)
    bad |= (c == C) & (up != B)
    bad |= (c == D) & (right != E)
    bad |= (c == E) & (left != D)
    bad |= (c == F) & ((down != G) | (right != H))
    bad |= (c == G) & ((up != F) | (right != I))
    bad |= (c == H) & ((left != F) | (down != I))
    bad |= (c == I) & ((up != H) | (left != G))
    bad |= c > I
    return int(bad.sum())


def check_grain_image(image: GrainImage) -> None:
    bad = grain_violations(image.cells)
    if bad:
        raise ValueError(f"grain image has {bad} inconsistent cells")


def grain_quota(dist: GrainDistribution, area: int, rng: np.random.Generator) -> tuple[int, int, int]:
    """Target counts of 2x1, 1x2 and 2x2 grains for ``area`` cells.

    Counts are randomly rounded so the expectation matches ``dist``; the 1x1
    count is whatever area remains.
    """
    n_grains = area / dist.cells_per_grain

    def rround(x: float) -> int:
        return int(np.floor(x + rng.random()))

    n4 = rround(dist.p4 * n_grains)
    n2 = rround(dist.p2 * n_grains)
    n3 = n2
    while 4 * n4 + 2 * n2 + 2 * n3 > area:
        if n4 > 0:
            n4 -= 1
        else:
            n2 -= 1
            n3 -= 1
    return n2, n3, n4


def _greedy_tile(dist: GrainDistribution, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    n2, n3, n4 = grain_quota(dist, rows * cols, rng)
    square_order = rng.permutation((rows - 1) * (cols - 1)) if n4 else np.empty(0, np.int64)
    n_dimer = (rows - 1) * cols + rows * (cols - 1)
    dimer_order = rng.permutation(n_dimer) if n2 + n3 else np.empty(0, np.int64)
    return kernels.greedy_tile(rows, cols, square_order, dimer_order, n2, n3, n4)


def _sequential_tile(dist: GrainDistribution, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    for attempt in range(MAX_RETRIES):
        n2, n3, n4 = grain_quota(dist, rows * cols, rng)
        if attempt >= MAX_RETRIES // 2:
            # small regions can make the exact quota infeasible (e.g. an odd
            # number of 1x2 grains in a 2-row strip of dimers): jitter it
            n2, n3, n4 = (max(0, n + int(d)) for n, d in zip((n2, n3, n4), rng.integers(-1, 2, size=3)))
            if 2 * n2 + 2 * n3 + 4 * n4 > rows * cols:
                continue
        uniforms = rng.random(DECISION_BUDGET * rows * cols)
        cells = kernels.sequential_tile(rows, cols, n2, n3, n4, uniforms)
        if cells is not None:
            return cells
    raise RuntimeError(f"could not tile a {rows}x{cols} region after {MAX_RETRIES} attempts")


def subimage_pool(dist: GrainDistribution, rng: np.random.Generator, size: int = SUBIMAGE_POOL,
                  side: int = SUBIMAGE) -> np.ndarray:
    return np.stack([_sequential_tile(dist, side, side, rng) for _ in range(size)])


def generate_grain_image(dist: GrainDistribution, rows: int, cols: int, seed) -> GrainImage:
    """Random tiling of a ``rows`` x ``cols`` medium.

    Up to p2 = 0.36 the greedy placer is used (2x2 grains first, then the
    2x1/1x2 grains, holes filled with 1x1).  Above that the image is
    assembled from 16x16 sub-images drawn from a pool; a ragged bottom or
    right strip is tiled fresh at its own size.
    """
    if rows < 2 or cols < 2 or rows % 2 or cols % 2:
        raise ValueError(f"image dimensions must be even and >= 2, got {rows}x{cols}")
    rng = np.random.default_rng(seed)
    if dist.p2 <= GREEDY_MAX_P2:
        cells = _greedy_tile(dist, rows, cols, rng)
    else:
        pool = subimage_pool(dist, rng)
        cells = np.empty((rows, cols), dtype=np.uint8)
        for r0 in range(0, rows, SUBIMAGE):
            for c0 in range(0, cols, SUBIMAGE):
                h, w = min(SUBIMAGE, rows - r0), min(SUBIMAGE, cols - c0)
                if h == SUBIMAGE and w == SUBIMAGE:
                    block = pool[rng.integers(len(pool))]
                else:
                    block = _sequential_tile(dist, h, w, rng)
                cells[r0:r0 + h, c0:c0 + w] = block
    image = GrainImage(cells)
    check_grain_image(image)
    return image


def last_written_index(cells: np.ndarray) -> np.ndarray:
    """Raster index of the last-written cell of the grain covering each cell."""
    rows, cols = cells.shape
    dm = np.zeros(9, dtype=np.int64)
    dn = np.zeros(9, dtype=np.int64)
    for lab, (a, b) in _LAST_OFFSET.items():
        dm[lab], dn[lab] = a, b
    mm, nn = np.indices((rows, cols))
    return (mm + dm[cells]) * cols + nn + dn[cells]


def write_bits(image: GrainImage, bits) -> WrittenImage:
    """Write +-1 bits in raster order; each grain keeps its last-written bit."""
    bits = np.asarray(bits).ravel()
    if bits.size != image.rows * image.cols:
        raise ValueError(f"expected {image.rows * image.cols} bits, got {bits.size}")
    values = bits[last_written_index(image.cells)].astype(np.int8)
    return WrittenImage(values)
