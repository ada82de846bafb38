"""Preference labeling of triangulations and the full-cell search that
yields approximately envy-free divisions.

Vertices of a triangulated division polytope are labeled by asking each
vertex's owner which piece selection they prefer in that division.  Hungry
players produce a Sperner labeling, so every complete scan sees at least
n - d fully-labeled cells.  A full cell with an owner-alternating edge of
disjoint labels yields a candidate division (the edge midpoint); the
verifier's envy report is the soundness authority for every candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .geometry import (
    CakeConfig,
    Division,
    PieceSelection,
    is_disjoint,
    midpoint_division,
    barycenter_division,
)
from .preferences import PreferenceModel, _selections
from .triangulation import (
    DEFAULT_CELL_CAP,
    OwnerLabeling,
    Triangulation,
    assign_owners,
    build,
)
from . import verifier


class SpernerViolationError(RuntimeError):
    """A model preferred a selection containing an empty piece at a
    boundary vertex, which would break the Sperner property."""


@lru_cache(maxsize=None)
def _disjoint_bitmasks(ks: tuple[int, ...]) -> tuple[int, ...]:
    """disjoint_bitmasks[t] has bit u set iff selections t and u are
    disjoint (selection indices in lexicographic order)."""
    sels = _selections(ks)
    masks = []
    for a in sels:
        m = 0
        for u, b in enumerate(sels):
            if all(x != y for x, y in zip(a.picks, b.picks)):
                m |= 1 << u
        masks.append(m)
    return tuple(masks)


class LabeledTriangulation:
    """A triangulation with owners plus a lazily-filled preference labeling;
    only vertices actually touched by a scan are ever queried."""

    def __init__(
        self,
        T: Triangulation,
        owners: OwnerLabeling,
        models: Mapping[int, PreferenceModel],
    ):
        self.T = T
        self.owners = owners
        self.models = dict(models)
        self._label_idx = np.full(T.vertex_count, -1, dtype=np.int64)
        self._labels: dict[int, PieceSelection] = {}
        self._sel_index = {
            s: t for t, s in enumerate(_selections(T.config.pieces_per_cake))
        }
        self.query_counts: dict[int, int] = {p: 0 for p in self.models}

    def label(self, vid: int) -> PieceSelection:
        got = self._labels.get(vid)
        if got is not None:
            return got
        T = self.T
        coords = T.vertex_matrix(vid)
        if T.is_pure_vertex(vid):
            # The only admissible selection picks the one nonempty piece of
            # each cake; no oracle call is needed.
            s = PieceSelection(tuple(row.index(T.mesh) for row in coords))
        else:
            owner = self.owners[vid]
            model = self.models[owner]
            division = T.division_of(vid)
            s = model.prefer(division, key=T.vertex_key(vid))
            self.query_counts[owner] = self.query_counts.get(owner, 0) + 1
            for i, p in enumerate(s.picks):
                if coords[i][p] == 0:
                    raise SpernerViolationError(
                        f"vertex {vid}: player {owner}'s model chose piece "
                        f"{p} of cake {i}, which is empty here"
                    )
        self._labels[vid] = s
        self._label_idx[vid] = self._sel_index[s]
        return s

    def label_index(self, vid: int) -> int:
        idx = self._label_idx[vid]
        if idx >= 0:
            return int(idx)
        self.label(vid)
        return int(self._label_idx[vid])

    def inject_label(self, vid: int, selection: PieceSelection) -> None:
        """Force a label without validation (for adversarial tests)."""
        self._labels[vid] = selection
        self._label_idx[vid] = self._sel_index[selection]

    def labeled_ids(self) -> list[int]:
        return sorted(self._labels)

    @property
    def total_queries(self) -> int:
        return sum(self.query_counts.values())


def check_sperner(LT: LabeledTriangulation) -> tuple[bool, list[tuple[int, str]]]:
    """Verify the labeled vertices: every label must pick a nonempty piece
    of every cake at its vertex (vacuously true with no labels)."""
    violations: list[tuple[int, str]] = []
    for vid in LT.labeled_ids():
        coords = LT.T.vertex_matrix(vid)
        s = LT._labels[vid]
        for i, p in enumerate(s.picks):
            if coords[i][p] == 0:
                violations.append(
                    (vid, f"label picks empty piece {p} of cake {i}")
                )
                break
    return not violations, violations


@dataclass(frozen=True)
class FullCell:
    """A maximal cell whose vertices carry pairwise-distinct labels."""

    vertex_ids: tuple[int, ...]
    labels: tuple[PieceSelection, ...]
    owners: tuple[int, ...]


def full_cells(LT: LabeledTriangulation) -> Iterator[FullCell]:
    """Stream the fully-labeled cells of a complete scan (labels filled
    lazily as cells are visited)."""
    owners = LT.owners
    for ids in LT.T.cell_vertex_ids():
        idxs = [LT.label_index(v) for v in ids]
        if len(set(idxs)) != len(ids):
            continue
        yield FullCell(
            vertex_ids=ids,
            labels=tuple(LT._labels[v] for v in ids),
            owners=tuple(owners[v] for v in ids),
        )


def disjoint_owner_edge(
    fc: FullCell,
) -> tuple[int, PieceSelection, int, PieceSelection] | None:
    """An edge of the cell whose endpoints have different owners and
    pairwise-disjoint labels, if one exists; the lexicographically smallest
    vertex-id pair is returned for determinism."""
    found = _disjoint_owner_edge_positions(fc)
    if found is None:
        return None
    a, b = found
    return (fc.owners[a], fc.labels[a], fc.owners[b], fc.labels[b])


def _disjoint_owner_edge_positions(fc: FullCell) -> tuple[int, int] | None:
    order = sorted(range(len(fc.vertex_ids)), key=lambda t: fc.vertex_ids[t])
    for i, a in enumerate(order):
        for b in order[i + 1 :]:
            if fc.owners[a] == fc.owners[b]:
                continue
            if is_disjoint(fc.labels[a], fc.labels[b]):
                return (a, b)
    return None


# ---- reports ----


@dataclass
class SolveReport:
    division: Division | None
    allocation: dict[int, PieceSelection]
    delta: float | None
    mesh_used: int
    cells_found: int
    disjoint: bool
    converged: bool
    flags: list[str] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "v": 1,
            "division": self.division.to_jsonable() if self.division else None,
            "allocation": {
                str(p): list(s.picks) for p, s in sorted(self.allocation.items())
            },
            "delta": self.delta,
            "mesh_used": self.mesh_used,
            "cells_found": self.cells_found,
            "disjoint": self.disjoint,
            "converged": self.converged,
            "flags": list(self.flags),
        }


def existence_guaranteed(config: CakeConfig) -> bool:
    """Known positive families for two players: two cakes with at least one
    cut into three or more pieces, or three cakes each cut into four or
    more pieces."""
    ks = config.pieces_per_cake
    if len(ks) == 2 and max(ks) >= 3:
        return True
    if len(ks) == 3 and min(ks) >= 4:
        return True
    return False


@dataclass
class _Candidate:
    division: Division
    allocation: dict[int, PieceSelection]
    report: verifier.EnvyReport
    mesh: int
    cells_seen: int

    @property
    def delta(self) -> float:
        return self.report.delta


def _evaluate_candidate(
    LT: LabeledTriangulation,
    models: Mapping[int, PreferenceModel],
    fc: FullCell,
    positions: tuple[int, int],
    mesh: int,
    cells_seen: int,
) -> _Candidate:
    a, b = positions
    va, vb = fc.vertex_ids[a], fc.vertex_ids[b]
    division = midpoint_division(LT.T.division_of(va), LT.T.division_of(vb))
    allocation = {fc.owners[a]: fc.labels[a], fc.owners[b]: fc.labels[b]}
    report = verifier.envy_report(division, allocation, models)
    return _Candidate(division, allocation, report, mesh, cells_seen)


def _center_point(config: CakeConfig) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(
        tuple(Fraction(1, k) for _ in range(k)) for k in config.pieces_per_cake
    )


def _blend_division(a: Division, b: Division, t: float) -> Division:
    return Division(
        tuple(
            tuple((1.0 - t) * x + t * y for x, y in zip(ra, rb))
            for ra, rb in zip(a.rows, b.rows)
        )
    )


def _refine_on_segment(
    div_a: Division,
    div_b: Division,
    allocation: Mapping[int, PieceSelection],
    models: Mapping[int, PreferenceModel],
    *,
    coarse: int = 33,
    iters: int = 60,
) -> tuple[Division, verifier.EnvyReport]:
    """Minimize the certified envy gap over the segment between two
    divisions (the winning pair may tie only on a lower-dimensional set, so
    the best point of an edge generally sits between its endpoints).

    Coarse grid scan plus golden-section refinement around the best
    bracket; deterministic.  The returned report certifies the returned
    division itself.
    """

    def report_at(t: float) -> verifier.EnvyReport:
        return verifier.envy_report(_blend_division(div_a, div_b, t), allocation, models)

    ts = [i / (coarse - 1) for i in range(coarse)]
    reports = [report_at(t) for t in ts]
    best_i = min(range(coarse), key=lambda i: (reports[i].delta, i))
    lo = ts[max(0, best_i - 1)]
    hi = ts[min(coarse - 1, best_i + 1)]
    best_t, best_rep = ts[best_i], reports[best_i]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    r1, r2 = report_at(x1), report_at(x2)
    for _ in range(iters):
        if r1.delta <= r2.delta:
            hi, x2, r2 = x2, x1, r1
            x1 = hi - inv_phi * (hi - lo)
            r1 = report_at(x1)
        else:
            lo, x1, r1 = x1, x2, r2
            x2 = lo + inv_phi * (hi - lo)
            r2 = report_at(x2)
        for t, rep in ((x1, r1), (x2, r2)):
            if rep.delta < best_rep.delta:
                best_t, best_rep = t, rep
    return _blend_division(div_a, div_b, best_t), best_rep


def _scan_mesh(
    LT: LabeledTriangulation,
    models: Mapping[int, PreferenceModel],
    tol: float,
    center_first: bool,
) -> tuple[_Candidate | None, FullCell | None, int, bool]:
    """One cell scan at a fixed mesh.

    Candidates come from every owner-alternating edge with disjoint labels,
    in any cell: full cells carry them near the solution set's boundary,
    while cells inside the solution set (whose labels collapse to the two
    winning selections) carry them everywhere.  Returns (best candidate,
    first full cell seen as a fallback, number of full cells seen,
    early-stop flag); stops as soon as a candidate is certified within tol.
    """
    T = LT.T
    owners = LT.owners
    masks = _disjoint_bitmasks(T.config.pieces_per_cake)
    best: _Candidate | None = None
    fallback: FullCell | None = None
    full_seen = 0
    seen_edges: set[tuple[int, int]] = set()

    def cell_streams() -> Iterator[tuple[int, ...]]:
        if center_first:
            priority = T.cells_containing(_center_point(T.config))
            emitted = set(priority)
            yield from priority
            for ids in T.cell_vertex_ids():
                if ids not in emitted:
                    yield ids
        else:
            yield from T.cell_vertex_ids()

    for ids in cell_streams():
        idxs = [LT.label_index(v) for v in ids]
        is_full = len(set(idxs)) == len(ids)
        if is_full:
            full_seen += 1
            if fallback is None:
                fallback = FullCell(
                    vertex_ids=ids,
                    labels=tuple(LT._labels[v] for v in ids),
                    owners=tuple(owners[v] for v in ids),
                )
        positions_a = [t for t, v in enumerate(ids) if owners[v] == 0]
        positions_b = [t for t, v in enumerate(ids) if owners[v] == 1]
        for a in positions_a:
            mask_a = masks[idxs[a]]
            for b in positions_b:
                if not mask_a >> idxs[b] & 1:
                    continue
                edge = (
                    (ids[a], ids[b]) if ids[a] < ids[b] else (ids[b], ids[a])
                )
                if edge in seen_edges:
                    continue
                seen_edges.add(edge)
                fc = FullCell(
                    vertex_ids=ids,
                    labels=tuple(LT._labels[v] for v in ids),
                    owners=tuple(owners[v] for v in ids),
                )
                cand = _evaluate_candidate(
                    LT, models, fc, (a, b), T.mesh, full_seen
                )
                if best is None or cand.delta < best.delta:
                    best = cand
                if best.delta <= tol:
                    return best, fallback, full_seen, True
    return best, fallback, full_seen, False


def _fallback_candidate(
    LT: LabeledTriangulation,
    models: Mapping[int, PreferenceModel],
    fc: FullCell,
    full_seen: int,
) -> _Candidate:
    """A different-but-conflicting allocation from a full cell: the
    lexicographically smallest owner-alternating edge (all labels of a full
    cell are distinct, so the selections differ)."""
    order = sorted(range(len(fc.vertex_ids)), key=lambda t: fc.vertex_ids[t])
    for i, a in enumerate(order):
        for b in order[i + 1 :]:
            if fc.owners[a] != fc.owners[b]:
                return _evaluate_candidate(
                    LT, models, fc, (a, b), LT.T.mesh, full_seen
                )
    raise AssertionError("uniform owner labeling always mixes owners in a cell")


def solve_envy_free(
    config: CakeConfig,
    models: Mapping[int, PreferenceModel],
    schedule: Sequence[int],
    tol: float,
    *,
    cap: int = DEFAULT_CELL_CAP,
) -> SolveReport:
    """Refinement loop over the mesh schedule: scan full cells, extract
    disjoint owner edges, certify edge midpoints with the verifier, stop
    when the normalized envy gap is within tol.

    The Sperner machinery only guides the search; the returned report is
    always verifier-certified.
    """
    if sorted(models) != [0, 1]:
        raise ValueError("two players (0 and 1) are required")
    if not schedule or list(schedule) != sorted(set(schedule)):
        raise ValueError("schedule must be strictly increasing")
    if tol <= 0:
        raise ValueError("tol must be positive")
    flags: list[str] = []
    if not existence_guaranteed(config):
        flags.append("no-existence-guarantee")
    center_first = config.pieces_per_cake == (4, 4, 4)
    best: _Candidate | None = None
    best_fallback: _Candidate | None = None
    for N in schedule:
        T = build(config, N, cap=cap)
        owners = assign_owners(T, 2)
        LT = LabeledTriangulation(T, owners, models)
        cand, fallback_cell, full_seen, early = _scan_mesh(
            LT, models, tol, center_first
        )
        if cand is not None and (best is None or cand.delta < best.delta):
            best = cand
        if cand is None and fallback_cell is not None and best is None:
            fb = _fallback_candidate(LT, models, fallback_cell, full_seen)
            if best_fallback is None or fb.delta < best_fallback.delta:
                best_fallback = fb
        if best is not None and best.delta <= tol:
            return SolveReport(
                division=best.division,
                allocation=best.allocation,
                delta=best.delta,
                mesh_used=best.mesh,
                cells_found=best.cells_seen,
                disjoint=True,
                converged=True,
                flags=flags,
            )
    if best is not None:
        return SolveReport(
            division=best.division,
            allocation=best.allocation,
            delta=best.delta,
            mesh_used=best.mesh,
            cells_found=best.cells_seen,
            disjoint=True,
            converged=False,
            flags=flags + ["not-converged"],
        )
    if best_fallback is not None:
        return SolveReport(
            division=best_fallback.division,
            allocation=best_fallback.allocation,
            delta=best_fallback.delta,
            mesh_used=best_fallback.mesh,
            cells_found=best_fallback.cells_seen,
            disjoint=False,
            converged=False,
            flags=flags + ["not-converged"],
        )
    return SolveReport(
        division=None,
        allocation={},
        delta=None,
        mesh_used=schedule[-1],
        cells_found=0,
        disjoint=False,
        converged=False,
        flags=flags + ["not-converged", "no-full-cell"],
    )


def solve_different_selections(
    config: CakeConfig,
    models: Mapping[int, PreferenceModel],
    N: int,
    *,
    cap: int = DEFAULT_CELL_CAP,
) -> tuple[dict[int, PieceSelection], Division]:
    """A division where every player names a different (not necessarily
    disjoint) most-preferred selection: each player takes the label of a
    vertex they own in the first fully-labeled cell."""
    players = sorted(models)
    p = len(players)
    if p < 2:
        raise ValueError("need at least two players")
    m = config.num_cakes
    for i, k in enumerate(config.pieces_per_cake):
        # k >= 1 + (p-1)/m, checked in exact arithmetic.
        if m * (k - 1) < p - 1:
            raise ValueError(
                f"cake {i}: {k} pieces cannot support {p} players over "
                f"{m} cakes (need k >= 1 + (p-1)/m)"
            )
    T = build(config, N, cap=cap)
    owners = assign_owners(T, p)
    LT = LabeledTriangulation(
        T, owners, {players.index(q): models[q] for q in players}
    )
    # Owner indices are remapped to 0..p-1 for the labeling.
    remap = {idx: q for idx, q in enumerate(players)}
    for fc in full_cells(LT):
        chosen: dict[int, PieceSelection] = {}
        order = sorted(range(len(fc.vertex_ids)), key=lambda t: fc.vertex_ids[t])
        for t in order:
            player = remap[fc.owners[t]]
            if player not in chosen:
                chosen[player] = fc.labels[t]
        if len(chosen) == p:
            division = barycenter_division(
                [LT.T.division_of(v) for v in fc.vertex_ids]
            )
            return chosen, division
    raise RuntimeError("no fully-labeled cell found (hungry models guarantee one)")


def three_player_square(
    models: Mapping[int, PreferenceModel],
    schedule: Sequence[int],
    tol: float,
    *,
    cap: int = DEFAULT_CELL_CAP,
) -> SolveReport:
    """Three players on two cakes of two pieces: every fully-labeled
    triangle of a three-owner labeling carries three distinct selections,
    which always include a disjoint pair; that pair of players wins."""
    if sorted(models) != [0, 1, 2]:
        raise ValueError("three players (0, 1, 2) are required")
    config = CakeConfig.of(2, 2)
    best: _Candidate | None = None
    flags = ["three-player-pair"]
    for N in schedule:
        T = build(config, N, cap=cap)
        owners = assign_owners(T, 3)
        LT = LabeledTriangulation(T, owners, models)
        full_seen = 0
        seen_edges: set[tuple[int, int]] = set()
        for ids in T.cell_vertex_ids():
            labels = [LT.label(v) for v in ids]
            if len(set(labels)) == len(ids):
                full_seen += 1
            # Every triangle has three distinct owners, so any disjoint
            # label pair is an owner-alternating edge.
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    if not is_disjoint(labels[i], labels[j]):
                        continue
                    edge = (
                        (ids[i], ids[j]) if ids[i] < ids[j] else (ids[j], ids[i])
                    )
                    if edge in seen_edges:
                        continue
                    seen_edges.add(edge)
                    owner_i = owners[ids[i]]
                    owner_j = owners[ids[j]]
                    allocation = {owner_i: labels[i], owner_j: labels[j]}
                    pair_models = {
                        owner_i: models[owner_i],
                        owner_j: models[owner_j],
                    }
                    division, report = _refine_on_segment(
                        T.division_of(ids[i]),
                        T.division_of(ids[j]),
                        allocation,
                        pair_models,
                    )
                    cand = _Candidate(division, allocation, report, N, full_seen)
                    if best is None or cand.delta < best.delta:
                        best = cand
                    if best.delta <= tol:
                        return SolveReport(
                            division=best.division,
                            allocation=best.allocation,
                            delta=best.delta,
                            mesh_used=best.mesh,
                            cells_found=best.cells_seen,
                            disjoint=True,
                            converged=True,
                            flags=flags,
                        )
    if best is None:
        return SolveReport(
            division=None,
            allocation={},
            delta=None,
            mesh_used=schedule[-1],
            cells_found=0,
            disjoint=False,
            converged=False,
            flags=flags + ["not-converged", "no-full-cell"],
        )
    return SolveReport(
        division=best.division,
        allocation=best.allocation,
        delta=best.delta,
        mesh_used=best.mesh,
        cells_found=best.cells_seen,
        disjoint=True,
        converged=False,
        flags=flags + ["not-converged"],
    )


# ---- prism full-cell structure ----


@dataclass(frozen=True)
class PrismCellAnalysis:
    nondegenerate: bool
    pivot: PieceSelection | None
    partners: tuple[PieceSelection, PieceSelection] | None
    forces_disjoint_owner_edge: bool


def prism_full_cell_analysis(fc: FullCell) -> PrismCellAnalysis:
    """For a full cell of the two-cake (2 and 3 pieces) polytope: when the
    four labels are affinely independent, some label is disjoint from two
    of the others, and a two-owner uniform labeling then necessarily has an
    owner-alternating disjoint edge."""
    labels = fc.labels
    if len(labels) != 4:
        raise ValueError("expected a 3-dimensional cell with 4 labels")
    pts = np.array(
        [
            [1.0 if j == s.picks[i] else 0.0 for i, k in enumerate((2, 3)) for j in range(k)]
            for s in labels
        ]
    )
    diffs = pts[1:] - pts[0]
    nondegenerate = np.linalg.matrix_rank(diffs) == 3
    if not nondegenerate:
        return PrismCellAnalysis(False, None, None, False)
    pivot = None
    partners = None
    for t, s in enumerate(labels):
        others = [u for u in range(4) if u != t and is_disjoint(s, labels[u])]
        if len(others) >= 2:
            pivot = s
            partners = (labels[others[0]], labels[others[1]])
            break
    forces = False
    if pivot is not None:
        t = labels.index(pivot)
        for u, lab in enumerate(labels):
            if (
                fc.owners[u] != fc.owners[t]
                and is_disjoint(pivot, lab)
            ):
                forces = True
                break
    return PrismCellAnalysis(
        nondegenerate=True,
        pivot=pivot,
        partners=partners,
        forces_disjoint_owner_edge=forces,
    )
