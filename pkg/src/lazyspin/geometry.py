"""Integer-lattice geometry for the L-mesh.

Vertices are plain ``(x, y)`` integer tuples. The mesh for parameter ``L`` is
the set of vertices with at least one coordinate divisible by ``L``. Every mesh
vertex ``v`` is assigned a frame: the graph boundary of an open square of side
``2L`` whose lower-left corner (the anchor) has both coordinates divisible by
``L`` and which keeps ``v`` at least ``L/2`` away from its boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Tuple

Vertex = Tuple[int, int]

NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def neighbors(v: Vertex) -> tuple[Vertex, Vertex, Vertex, Vertex]:
    x, y = v
    return (x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)


def reading_order(v: Vertex) -> tuple[int, int]:
    """Sort key for the canonical row-major order: top row first, then left to right."""
    return (-v[1], v[0])


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle of vertices, bounds inclusive.

    Membership is O(1) and the box never materializes its vertex set unless
    iterated.
    """

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"empty box {self}")

    @classmethod
    def square(cls, anchor: Vertex, side: int) -> "Box":
        """The open square ``anchor + (a, b)`` with ``0 < a, b < side``."""
        k, l = anchor
        return cls(k + 1, l + 1, k + side - 1, l + side - 1)

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    def __contains__(self, v) -> bool:
        x, y = v
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def __len__(self) -> int:
        return self.width * self.height

    def __iter__(self) -> Iterator[Vertex]:
        """Vertices in reading order."""
        for y in range(self.y1, self.y0 - 1, -1):
            for x in range(self.x0, self.x1 + 1):
                yield (x, y)


@dataclass(frozen=True)
class Frame:
    anchor: Vertex
    half_side: int
    vertices: tuple[Vertex, ...]

    @property
    def interior(self) -> Box:
        return Box.square(self.anchor, 2 * self.half_side)

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self) -> Iterator[Vertex]:
        return iter(self.vertices)

    def __contains__(self, v) -> bool:
        k, l = self.anchor
        s = 2 * self.half_side
        x, y = v
        on_vertical = (x == k or x == k + s) and l < y < l + s
        on_horizontal = (y == l or y == l + s) and k < x < k + s
        return on_vertical or on_horizontal


def on_mesh(v: Vertex, L: int) -> bool:
    if L < 1:
        raise ValueError(f"mesh parameter must be positive, got {L}")
    return v[0] % L == 0 or v[1] % L == 0


def square_boundary(anchor: Vertex, side: int) -> tuple[Vertex, ...]:
    """Graph boundary of the open ``side``-square at ``anchor``, clockwise.

    Clockwise is taken with the y axis pointing up. The walk starts at
    ``anchor + (1, 0)``, climbs the left side, runs east along the top, descends
    the right side and returns west along the bottom. Corners are excluded
    because they are not edge-adjacent to the open square.
    """
    k, l = anchor
    s = side
    out = [(k + 1, l)]
    out.extend((k, l + b) for b in range(1, s))
    out.extend((k + a, l + s) for a in range(1, s))
    out.extend((k + s, l + b) for b in range(s - 1, 0, -1))
    out.extend((k + a, l) for a in range(s - 1, 1, -1))
    return tuple(out)


def _frame_anchor_coord(i: int, L: int) -> int:
    # unique multiple k of L with k + L/2 <= i < k + 3L/2, in integers
    return L * ((2 * i - L) // (2 * L))


def frame_of(v: Vertex, L: int) -> Frame:
    """The frame assigned to mesh vertex ``v``.

    Raises:
        ValueError: if ``v`` is not on the mesh.
    """
    if not on_mesh(v, L):
        raise ValueError(f"{v} is not on the L={L} mesh")
    anchor = (_frame_anchor_coord(v[0], L), _frame_anchor_coord(v[1], L))
    return Frame(anchor, L, square_boundary(anchor, 2 * L))


def graph_boundary(region: Iterable[Vertex]) -> frozenset[Vertex]:
    """Vertices outside ``region`` that share an edge with some vertex of it."""
    region = region if isinstance(region, (set, frozenset, Box)) else frozenset(region)
    out = set()
    for v in region:
        for w in neighbors(v):
            if w not in region:
                out.add(w)
    return frozenset(out)


def bisected_boundary(anchor: Vertex, L: int) -> frozenset[Vertex]:
    """Union of the boundaries of the four ``L``-subsquares of the ``2L``-square."""
    if L < 1:
        raise ValueError(f"mesh parameter must be positive, got {L}")
    k, l = anchor
    out = set()
    for dx in (0, L):
        for dy in (0, L):
            out.update(square_boundary((k + dx, l + dy), L))
    return frozenset(out)


def cell_of(v: Vertex, L: int) -> tuple[Vertex, Box, tuple[Vertex, ...]]:
    """The ``L``-cell containing an off-mesh vertex.

    Returns:
        ``(anchor, interior, frame)`` where ``interior`` holds the ``(L-1)^2``
        vertices strictly inside the cell and ``frame`` is its graph boundary,
        which lies entirely on the mesh.
    """
    if on_mesh(v, L):
        raise ValueError(f"{v} lies on the L={L} mesh and has no cell")
    anchor = (L * (v[0] // L), L * (v[1] // L))
    return anchor, Box.square(anchor, L), square_boundary(anchor, L)
