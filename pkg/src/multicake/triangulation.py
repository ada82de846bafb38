"""Mesh-1/N simplicial triangulations of the division polytope.

The polytope of divisions is a product of simplices (one per cake).  We
triangulate it with the staircase (Freudenthal-style) scheme on the lattice
of integer matrices with row sums N: every maximal cell is a monotone chain
of d+1 lattice vertices in which consecutive vertices differ by moving one
1/N unit of cake from a piece to the next-indexed piece of the same cake.
All arithmetic on vertices is exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product
from typing import Iterator, Sequence

import numpy as np

from .geometry import (
    CakeConfig,
    Division,
    rational_division_key,
)

DEFAULT_CELL_CAP = 10**8


class ResourceCapError(RuntimeError):
    """Raised when a build would enumerate more cells than the cap allows."""


@dataclass(frozen=True)
class LatticeVertex:
    """A triangulation vertex: integer piece units summing to N per cake."""

    id: int
    coords: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class SimplexCell:
    """A maximal cell, as the ids of its monotone chain of vertices."""

    vertex_ids: tuple[int, ...]


def vertex_count_formula(config: CakeConfig, mesh: int) -> int:
    """Number of lattice points: one composition of N per cake."""
    return math.prod(
        math.comb(mesh + k - 1, k - 1) for k in config.pieces_per_cake
    )


def cell_count_formula(config: CakeConfig, mesh: int) -> int:
    """Number of maximal cells of the staircase triangulation."""
    d = sum(k - 1 for k in config.pieces_per_cake)
    denom = math.prod(math.factorial(k - 1) for k in config.pieces_per_cake)
    return mesh**d * math.factorial(d) // denom


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` nonnegative ints summing to ``total``, in
    lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


class Triangulation:
    """Staircase triangulation of the division polytope at mesh 1/N.

    Vertices are materialized (their count is polynomial); maximal cells are
    streamed lazily, never stored.
    """

    def __init__(self, config: CakeConfig, mesh: int, cap: int = DEFAULT_CELL_CAP):
        if mesh < 1:
            raise ValueError("mesh parameter N must be >= 1")
        predicted = cell_count_formula(config, mesh)
        if predicted > cap:
            raise ResourceCapError(
                f"predicted cell count {predicted} exceeds cap {cap}"
            )
        self.config = config
        self.mesh = mesh
        ks = config.pieces_per_cake
        self._offsets = tuple(int(x) for x in np.cumsum((0,) + ks[:-1]))
        self._width = sum(ks)
        # Flat concatenated rows, lexicographic; id = position.
        self._flats: list[tuple[int, ...]] = [
            tuple(x for row in rows for x in row)
            for rows in product(*(_compositions(mesh, k) for k in ks))
        ]
        self._vid: dict[tuple[int, ...], int] = {
            flat: i for i, flat in enumerate(self._flats)
        }
        # Elementary moves: (source flat index, destination flat index) for a
        # transfer from piece r-1 to piece r of one cake.
        self._moves: tuple[tuple[int, int], ...] = tuple(
            (off + r - 1, off + r)
            for off, k in zip(self._offsets, ks)
            for r in range(1, k)
        )
        # Potential whose value increases by exactly 1 along every move:
        # sum of (piece index within cake) * units.
        self._potential_coeffs = tuple(
            j for k in ks for j in range(k)
        )

    # ---- vertices ----

    @property
    def vertex_count(self) -> int:
        return len(self._flats)

    @property
    def dimension(self) -> int:
        return len(self._moves)

    def _rows_of_flat(self, flat: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
        ks = self.config.pieces_per_cake
        return tuple(
            flat[off : off + k] for off, k in zip(self._offsets, ks)
        )

    def vertex(self, vid: int) -> LatticeVertex:
        return LatticeVertex(id=vid, coords=self._rows_of_flat(self._flats[vid]))

    def vertices(self) -> Iterator[LatticeVertex]:
        for vid in range(len(self._flats)):
            yield self.vertex(vid)

    def vertex_matrix(self, vid: int) -> tuple[tuple[int, ...], ...]:
        return self._rows_of_flat(self._flats[vid])

    def division_of(self, vid: int) -> Division:
        n = float(self.mesh)
        return Division(
            tuple(
                tuple(y / n for y in row)
                for row in self._rows_of_flat(self._flats[vid])
            )
        )

    def vertex_key(self, vid: int) -> tuple[int, tuple[tuple[int, ...], ...]]:
        """Canonical exact rational key of the vertex division."""
        return rational_division_key(self._rows_of_flat(self._flats[vid]), self.mesh)

    def vertex_potential(self, vid: int) -> int:
        flat = self._flats[vid]
        return sum(c * y for c, y in zip(self._potential_coeffs, flat))

    def is_pure_vertex(self, vid: int) -> bool:
        return all(
            max(row) == self.mesh for row in self._rows_of_flat(self._flats[vid])
        )

    # ---- cells ----

    @property
    def predicted_cell_count(self) -> int:
        return cell_count_formula(self.config, self.mesh)

    def cell_vertex_ids(self) -> Iterator[tuple[int, ...]]:
        """Stream every maximal cell as a tuple of vertex ids along its
        monotone chain (deterministic order)."""
        moves = self._moves
        d = len(moves)
        vid = self._vid
        offsets = self._offsets
        full_mask = (1 << d) - 1
        ks = self.config.pieces_per_cake

        def supplied(y: list[int], remaining: int) -> bool:
            # Every remaining move must still be able to fire: the transfer
            # out of piece r-1 needs a unit there now, or an earlier remaining
            # move of the same cake feeding it transitively.
            for mi in range(d):
                if not remaining >> mi & 1:
                    continue
                src = moves[mi][0]
                ok = y[src] >= 1
                j = mi
                while not ok:
                    j -= 1
                    src2 = moves[j][0] if j >= 0 else -1
                    # Moves of one cake are contiguous in self._moves.
                    if j < 0 or moves[j][1] != src:
                        break
                    if not remaining >> j & 1:
                        break
                    src = src2
                    ok = y[src] >= 1
                if not ok:
                    return False
            return True

        def dfs(y: list[int], remaining: int, path: list[int]):
            if remaining == 0:
                yield tuple(path)
                return
            if not supplied(y, remaining):
                return
            for mi in range(d):
                if not remaining >> mi & 1:
                    continue
                src, dst = moves[mi]
                if y[src] < 1:
                    continue
                y[src] -= 1
                y[dst] += 1
                new_id = vid[tuple(y)]
                path.append(new_id)
                yield from dfs(y, remaining & ~(1 << mi), path)
                path.pop()
                y[src] += 1
                y[dst] -= 1

        for base_flat in self._flats:
            # A chain uses every move once, so piece 0 of each cake must
            # start with at least one unit to give away.
            if any(base_flat[off] == 0 for off in offsets):
                continue
            y = list(base_flat)
            path = [vid[base_flat]]
            yield from dfs(y, full_mask, path)

    def cells(self) -> Iterator[SimplexCell]:
        for ids in self.cell_vertex_ids():
            yield SimplexCell(vertex_ids=ids)

    def cell_barycenter(self, vertex_ids: Sequence[int]) -> Division:
        n = len(vertex_ids)
        acc = [0] * self._width
        for vid in vertex_ids:
            flat = self._flats[vid]
            for i, y in enumerate(flat):
                acc[i] += y
        scale = float(n * self.mesh)
        ks = self.config.pieces_per_cake
        return Division(
            tuple(
                tuple(acc[off + j] / scale for j in range(k))
                for off, k in zip(self._offsets, ks)
            )
        )

    def cells_containing(
        self, point: Sequence[Sequence[Fraction]]
    ) -> list[tuple[int, ...]]:
        """All maximal cells whose closure contains the given division,
        entries as exact ``Fraction``s.  Used to seed center-out scans."""
        mesh = self.mesh
        moves = self._moves
        d = len(moves)
        vid = self._vid
        # Cumulative coordinate per move: u(move (cake,r)) = sum of units in
        # pieces r.. of that cake, scaled by N.
        us: list[Fraction] = []
        for (src, dst), (i, r) in zip(moves, self._move_names()):
            row = point[i]
            us.append(mesh * sum(row[r:], Fraction(0)))
        results: list[tuple[int, ...]] = []
        bases: list[list[int]] = [[]]
        for u in us:
            floor = int(u) if u.denominator == 1 else int(u) if u > 0 else 0
            floor = u.numerator // u.denominator
            opts = [floor]
            if u.denominator == 1 and floor - 1 >= 0:
                opts.append(floor - 1)
            bases = [b + [o] for b in bases for o in opts]
        seen = set()
        for base in bases:
            fracs = [u - b for u, b in zip(us, base)]
            if any(f < 0 or f > 1 for f in fracs):
                continue
            # Reconstruct the base lattice point in piece units.
            flat = self._base_flat_from_u(base)
            if flat is None:
                continue
            # Enumerate move orders weakly descending in fractional part.
            order_groups: dict[Fraction, list[int]] = {}
            for mi, f in enumerate(fracs):
                order_groups.setdefault(f, []).append(mi)
            sorted_fracs = sorted(order_groups, reverse=True)
            group_lists = [order_groups[f] for f in sorted_fracs]

            def expand(prefix: list[int], gi: int):
                if gi == len(group_lists):
                    yield list(prefix)
                    return
                for perm in permutations(group_lists[gi]):
                    yield from expand(prefix + list(perm), gi + 1)

            for order in expand([], 0):
                y = list(flat)
                path = [vid.get(tuple(y))]
                if path[0] is None:
                    break
                ok = True
                for mi in order:
                    src, dst = moves[mi]
                    if y[src] < 1:
                        ok = False
                        break
                    y[src] -= 1
                    y[dst] += 1
                    nid = vid.get(tuple(y))
                    if nid is None:
                        ok = False
                        break
                    path.append(nid)
                if ok and len(path) == d + 1:
                    key = tuple(path)
                    if key not in seen:
                        seen.add(key)
                        results.append(key)
        return results

    def _move_names(self) -> list[tuple[int, int]]:
        names = []
        for i, k in enumerate(self.config.pieces_per_cake):
            for r in range(1, k):
                names.append((i, r))
        return names

    def _base_flat_from_u(self, base_u: Sequence[int]) -> tuple[int, ...] | None:
        ks = self.config.pieces_per_cake
        flat: list[int] = []
        pos = 0
        for k in ks:
            u = list(base_u[pos : pos + k - 1])
            pos += k - 1
            row = [self.mesh - u[0]] if u else [self.mesh]
            if u:
                for r in range(len(u) - 1):
                    row.append(u[r] - u[r + 1])
                row.append(u[-1])
            if any(x < 0 for x in row) or sum(row) != self.mesh:
                return None
            flat.extend(row)
        return tuple(flat)


def build(config: CakeConfig, N: int, cap: int = DEFAULT_CELL_CAP) -> Triangulation:
    """Staircase triangulation of the division polytope at mesh 1/N."""
    return Triangulation(config, N, cap=cap)


def dump_cells(T: Triangulation, fh) -> int:
    """Debug dump: one line per cell listing its vertices' lattice
    matrices.  Returns the number of cells written."""
    count = 0
    for ids in T.cell_vertex_ids():
        line = " ".join(
            ";".join(",".join(str(y) for y in row) for row in T.vertex_matrix(v))
            for v in ids
        )
        fh.write(line + "\n")
        count += 1
    return count


# ---- owner labeling ----


@dataclass(frozen=True)
class OwnerLabeling:
    """Assignment of triangulation vertices to players.

    Uniform by construction: the potential of consecutive chain vertices
    increases by exactly 1, so owners cycle through the players along every
    cell and per-cell counts differ by at most one.
    """

    players: int
    owner_of: np.ndarray  # uint8, indexed by vertex id

    def __getitem__(self, vid: int) -> int:
        return int(self.owner_of[vid])

    def owner(self, vid: int) -> int:
        return int(self.owner_of[vid])


def assign_owners(T: Triangulation, p: int) -> OwnerLabeling:
    """Uniform owner labeling by vertex potential modulo the player count."""
    if p < 2:
        raise ValueError("need at least 2 players")
    coeffs = np.array(T._potential_coeffs, dtype=np.int64)
    flats = np.array(T._flats, dtype=np.int64)
    owners = (flats @ coeffs) % p
    return OwnerLabeling(players=p, owner_of=owners.astype(np.uint8))


def owner_counts_uniform(owners_in_cell: Sequence[int], players: int) -> bool:
    counts = [0] * players
    for o in owners_in_cell:
        counts[o] += 1
    return max(counts) - min(counts) <= 1


# ---- facets ----


def facet_of(v: LatticeVertex) -> frozenset[tuple[int, int]]:
    """The facets of the polytope containing this vertex, as the set of
    (cake, piece) pairs whose piece length is zero."""
    return frozenset(
        (i, j)
        for i, row in enumerate(v.coords)
        for j, y in enumerate(row)
        if y == 0
    )


# ---- barycentric subdivision ----


@dataclass(frozen=True)
class BarycentricVertex:
    """Barycenter of a face of the original complex, tagged with the face
    dimension (used for owner assignment by dimension)."""

    id: int
    dim: int
    point: tuple[tuple[Fraction, ...], ...]


class BarycentricTriangulation:
    """Full barycentric subdivision of a staircase triangulation.

    Every d-cell is replaced by (d+1)! cells, one per saturated chain of
    faces; each new cell has exactly one barycenter of every dimension
    0..d.  Exact rational coordinates.
    """

    def __init__(
        self,
        config: CakeConfig,
        mesh: int,
        vertices: list[BarycentricVertex],
        cells: list[tuple[int, ...]],
    ):
        self.config = config
        self.mesh = mesh
        self.vertices = vertices
        self.cells = cells

    def owners_by_dimension(self, p: int) -> list[int]:
        """Owner of each vertex: barycenter dimension modulo player count."""
        return [v.dim % p for v in self.vertices]


def barycentric_subdivide(
    T: Triangulation, cap: int = DEFAULT_CELL_CAP
) -> BarycentricTriangulation:
    d = T.dimension
    predicted = T.predicted_cell_count * math.factorial(d + 1)
    if predicted > cap:
        raise ResourceCapError(
            f"predicted subdivided cell count {predicted} exceeds cap {cap}"
        )
    mesh = T.mesh
    vert_ids: dict[frozenset[int], int] = {}
    vertices: list[BarycentricVertex] = []
    cells: list[tuple[int, ...]] = []

    def barycenter_vertex(face: frozenset[int]) -> int:
        got = vert_ids.get(face)
        if got is not None:
            return got
        n = len(face)
        ks = T.config.pieces_per_cake
        acc = [[Fraction(0)] * k for k in ks]
        for vid in face:
            rows = T.vertex_matrix(vid)
            for i, row in enumerate(rows):
                for j, y in enumerate(row):
                    acc[i][j] += Fraction(y, mesh * n)
        new_id = len(vertices)
        vert_ids[face] = new_id
        vertices.append(
            BarycentricVertex(
                id=new_id, dim=n - 1, point=tuple(tuple(r) for r in acc)
            )
        )
        return new_id

    for cell in T.cell_vertex_ids():
        for perm in permutations(cell):
            chain = []
            face: frozenset[int] = frozenset()
            for vid in perm:
                face = face | {vid}
                chain.append(barycenter_vertex(face))
            cells.append(tuple(chain))
    return BarycentricTriangulation(T.config, mesh, vertices, cells)
