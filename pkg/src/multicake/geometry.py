"""Value types for multi-cake division: length matrices, piece selections,
and the polytope spanned by the pure divisions.

A division of ``m`` unit-length cakes, cake ``i`` cut into ``k_i`` pieces,
is a row-stochastic matrix of piece lengths.  Pure divisions (one piece per
cake owns the whole cake) are the vertices of the division polytope; every
division is a convex combination of them.  Only lengths matter here: pieces
are identified by index, never by position on the cake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterator, Sequence

# Row sums of matrices the library constructs itself must be exact to this.
ROW_SUM_TOL_EXACT = 1e-12
# User-supplied matrices (files, CLI) may deviate up to this before rejection.
ROW_SUM_TOL_INPUT = 1e-9

WEIGHT_SUM_TOL = 1e-12

PIECE_NAMES = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class CakeConfig:
    """How many pieces each unit-length cake is cut into."""

    pieces_per_cake: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.pieces_per_cake) < 1:
            raise ValueError("need at least one cake")
        for i, k in enumerate(self.pieces_per_cake):
            if not isinstance(k, int) or k < 2:
                raise ValueError(f"cake {i}: piece count must be an integer >= 2, got {k!r}")

    @classmethod
    def of(cls, *pieces_per_cake: int) -> "CakeConfig":
        return cls(tuple(pieces_per_cake))

    @property
    def num_cakes(self) -> int:
        return len(self.pieces_per_cake)

    @property
    def selection_count(self) -> int:
        return math.prod(self.pieces_per_cake)

    def selections(self) -> Iterator["PieceSelection"]:
        """All piece selections in lexicographic order of pick vectors."""
        for picks in product(*(range(k) for k in self.pieces_per_cake)):
            yield PieceSelection(picks)

    def selection_list(self) -> list["PieceSelection"]:
        return list(self.selections())

    def selection_index(self, s: "PieceSelection") -> int:
        """Rank of ``s`` in lexicographic order (mixed-radix encoding)."""
        idx = 0
        for k, pick in zip(self.pieces_per_cake, s.picks):
            idx = idx * k + pick
        return idx


@dataclass(frozen=True)
class PieceSelection:
    """One chosen piece per cake.  Doubles as the name of a pure division."""

    picks: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.picks)

    def __getitem__(self, i: int) -> int:
        return self.picks[i]

    def __iter__(self) -> Iterator[int]:
        return iter(self.picks)

    def __lt__(self, other: "PieceSelection") -> bool:
        return self.picks < other.picks

    def pretty(self) -> str:
        """Letter form, e.g. picks (0, 1) -> 'ab'."""
        return "".join(PIECE_NAMES[p] for p in self.picks)


def make_selection(config: CakeConfig, picks: Sequence[int]) -> PieceSelection:
    """Validated selection for ``config``; rejects out-of-range picks."""
    picks = tuple(int(p) for p in picks)
    if len(picks) != config.num_cakes:
        raise ValueError(
            f"selection has {len(picks)} picks for {config.num_cakes} cakes"
        )
    for i, (p, k) in enumerate(zip(picks, config.pieces_per_cake)):
        if not 0 <= p < k:
            raise ValueError(f"cake {i}: pick {p} out of range 0..{k - 1}")
    return PieceSelection(picks)


@dataclass(frozen=True)
class Division:
    """Piece lengths, one row per cake; every row sums to 1."""

    rows: tuple[tuple[float, ...], ...]

    @property
    def num_cakes(self) -> int:
        return len(self.rows)

    def __getitem__(self, i: int) -> tuple[float, ...]:
        return self.rows[i]

    def config(self) -> CakeConfig:
        return CakeConfig(tuple(len(r) for r in self.rows))

    def piece_lengths(self, s: PieceSelection) -> tuple[float, ...]:
        return tuple(self.rows[i][p] for i, p in enumerate(s.picks))

    def to_jsonable(self) -> list[list[float]]:
        return [list(r) for r in self.rows]


def make_division(
    config: CakeConfig,
    rows: Sequence[Sequence[float]],
    tol: float = ROW_SUM_TOL_INPUT,
) -> Division:
    """Validated division.  Normalization is never applied silently."""
    if len(rows) != config.num_cakes:
        raise ValueError(f"expected {config.num_cakes} rows, got {len(rows)}")
    out = []
    for i, (row, k) in enumerate(zip(rows, config.pieces_per_cake)):
        row = tuple(float(x) for x in row)
        if len(row) != k:
            raise ValueError(f"cake {i}: expected {k} pieces, got {len(row)}")
        for j, x in enumerate(row):
            if x < 0.0:
                raise ValueError(f"cake {i}, piece {j}: negative length {x}")
            if x > 1.0 + tol:
                raise ValueError(f"cake {i}, piece {j}: length {x} exceeds 1")
        total = math.fsum(row)
        if abs(total - 1.0) > tol:
            raise ValueError(f"cake {i}: row sums to {total}, expected 1")
        out.append(row)
    return Division(tuple(out))


def division_from_jsonable(data: Sequence[Sequence[float]],
                           config: CakeConfig | None = None,
                           tol: float = ROW_SUM_TOL_INPUT) -> Division:
    if config is None:
        config = CakeConfig(tuple(len(r) for r in data))
    return make_division(config, data, tol=tol)


def pure_division(config: CakeConfig, s: PieceSelection) -> Division:
    """The 0-1 division in which piece ``s[i]`` is the whole of cake ``i``."""
    s = make_selection(config, s.picks)
    rows = tuple(
        tuple(1.0 if j == s.picks[i] else 0.0 for j in range(k))
        for i, k in enumerate(config.pieces_per_cake)
    )
    return Division(rows)


def center(config: CakeConfig) -> Division:
    """The uniform division: every piece of cake ``i`` has length 1/k_i."""
    return Division(
        tuple(tuple(1.0 / k for _ in range(k)) for k in config.pieces_per_cake)
    )


def is_disjoint(s: PieceSelection, t: PieceSelection) -> bool:
    """True iff the selections share no piece on any cake."""
    if len(s) != len(t):
        raise ValueError("selections come from different configurations")
    return all(a != b for a, b in zip(s.picks, t.picks))


def conflicts(s: PieceSelection, t: PieceSelection) -> bool:
    """True iff ``s`` and ``t`` are distinct but share a piece somewhere."""
    if len(s) != len(t):
        raise ValueError("selections come from different configurations")
    return s.picks != t.picks and not is_disjoint(s, t)


@dataclass(frozen=True)
class PolytopeDescriptor:
    """Vertex count and dimension of the division polytope."""

    n: int
    d: int


def polytope_descriptor(config: CakeConfig) -> PolytopeDescriptor:
    n = math.prod(config.pieces_per_cake)
    d = sum(k - 1 for k in config.pieces_per_cake)
    return PolytopeDescriptor(n=n, d=d)


def cover_map_image(
    cell_vertices: Sequence[Division],
    cell_labels: Sequence[PieceSelection],
    point_barycentric: Sequence[float],
) -> Division:
    """Image of a point of a labeled cell under the piecewise-linear map
    sending each cell vertex to the pure division named by its label.

    ``point_barycentric`` are the point's barycentric weights over the cell
    vertices; the image is the same convex combination of the labels' pure
    divisions.
    """
    if not (len(cell_vertices) == len(cell_labels) == len(point_barycentric)):
        raise ValueError("vertices, labels and weights must have equal length")
    weights = [float(w) for w in point_barycentric]
    for w in weights:
        if w < 0.0:
            raise ValueError(f"negative barycentric weight {w}")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights sum to {math.fsum(weights)}, expected 1")
    if not cell_labels:
        raise ValueError("empty cell")
    config = cell_vertices[0].config()
    rows = [[0.0] * k for k in config.pieces_per_cake]
    for w, label in zip(weights, cell_labels):
        if w == 0.0:
            continue
        for i, p in enumerate(label.picks):
            rows[i][p] += w
    # Exactness when all the weight sits on a single vertex.
    if 1.0 in weights and weights.count(1.0) == 1 and all(
        w in (0.0, 1.0) for w in weights
    ):
        return pure_division(config, cell_labels[weights.index(1.0)])
    return Division(tuple(tuple(r) for r in rows))


def midpoint_division(a: Division, b: Division) -> Division:
    """Entrywise midpoint of two divisions over the same configuration."""
    if tuple(len(r) for r in a.rows) != tuple(len(r) for r in b.rows):
        raise ValueError("divisions come from different configurations")
    return Division(
        tuple(
            tuple((x + y) / 2.0 for x, y in zip(ra, rb))
            for ra, rb in zip(a.rows, b.rows)
        )
    )


def barycenter_division(divisions: Sequence[Division]) -> Division:
    """Entrywise average of divisions over the same configuration."""
    if not divisions:
        raise ValueError("empty list of divisions")
    shape = tuple(len(r) for r in divisions[0].rows)
    n = len(divisions)
    rows = [[0.0] * k for k in shape]
    for d in divisions:
        if tuple(len(r) for r in d.rows) != shape:
            raise ValueError("divisions come from different configurations")
        for i, row in enumerate(d.rows):
            for j, x in enumerate(row):
                rows[i][j] += x
    return Division(tuple(tuple(x / n for x in r) for r in rows))


def rational_division_key(
    numerators: Sequence[Sequence[int]], denominator: int
) -> tuple[int, tuple[tuple[int, ...], ...]]:
    """Canonical exact key for a division whose entries are
    ``numerators[i][j] / denominator``: reduced by the common gcd so the
    same rational matrix always keys identically.
    """
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    g = denominator
    for row in numerators:
        for y in row:
            if y < 0:
                raise ValueError("negative numerator")
            g = math.gcd(g, y)
    return (
        denominator // g,
        tuple(tuple(y // g for y in row) for row in numerators),
    )


def division_of_key(key: tuple[int, tuple[tuple[int, ...], ...]]) -> Division:
    den, rows = key
    return Division(tuple(tuple(y / den for y in row) for row in rows))
