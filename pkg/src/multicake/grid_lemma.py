"""Plane-weight analysis on the 4x4x4 grid of pure divisions of three
cakes cut into four pieces each.

The 64 piece selections sit on a 4x4x4 grid; fixing one piece of one cake
gives one of 12 planes, and two selections are disjoint exactly when they
share no plane.  For label sets whose pure divisions average (with positive
weights) to the all-quarters center matrix, every plane carries total
weight 1/4, and the disjointness graph of the labels always has a
connected component of at least 6 -- large enough that a half-and-half
owner split must place both owners inside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np
import scipy.optimize

from .geometry import CakeConfig, PieceSelection, is_disjoint

GRID_CONFIG = CakeConfig.of(4, 4, 4)
NUM_PLANES = 12

PLANE_WEIGHT_TOL = 1e-9
POSITIVE_WEIGHT_TOL = 1e-9
RESIDUAL_TOL = 1e-9

MIN_COMPONENT = 6


def _check_labels(labels: Sequence[PieceSelection]) -> None:
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be distinct")
    if len(labels) > 10:
        raise ValueError("at most 10 labels (a 9-simplex has 10 vertices)")
    for s in labels:
        if len(s.picks) != 3 or any(not 0 <= p < 4 for p in s.picks):
            raise ValueError(f"label {s.picks} is not a 4x4x4 grid selection")


def plane_incidence(labels: Sequence[PieceSelection]) -> np.ndarray:
    """0-1 matrix: rows are the 12 planes (cake 0 pieces a..d, cake 1,
    cake 2), columns the labels; 1 where the label lies on the plane."""
    A = np.zeros((NUM_PLANES, len(labels)))
    for t, s in enumerate(labels):
        for i, p in enumerate(s.picks):
            A[4 * i + p, t] = 1.0
    return A


def solve_center_weights(
    labels: Sequence[PieceSelection],
    residual_tol: float = RESIDUAL_TOL,
) -> np.ndarray | None:
    """Nonnegative weights making the labels' pure divisions average to the
    all-quarters center matrix, or None when infeasible.

    Equivalent to giving every plane total weight 1/4.  Solved as a
    nonnegative least-squares problem; feasibility requires residual within
    residual_tol.
    """
    _check_labels(labels)
    A = plane_incidence(labels)
    sys = np.vstack([A, np.ones((1, len(labels)))])
    rhs = np.concatenate([np.full(NUM_PLANES, 0.25), [1.0]])
    weights, rnorm = scipy.optimize.nnls(sys, rhs)
    if rnorm > residual_tol:
        return None
    return weights


def interior_weights(
    labels: Sequence[PieceSelection],
    strict_tol: float = POSITIVE_WEIGHT_TOL,
) -> np.ndarray | None:
    """Strictly positive feasible weights when they exist: the solution
    maximizing the minimum weight subject to every plane summing to 1/4."""
    _check_labels(labels)
    L = len(labels)
    A = plane_incidence(labels)
    # Variables: weights w_0..w_{L-1} and the min-weight bound t.
    c = np.zeros(L + 1)
    c[-1] = -1.0
    A_eq = np.hstack([A, np.zeros((NUM_PLANES, 1))])
    b_eq = np.full(NUM_PLANES, 0.25)
    A_ub = np.hstack([-np.eye(L), np.ones((L, 1))])
    b_ub = np.zeros(L)
    res = scipy.optimize.linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * L + [(None, 0.25)],
        method="highs",
    )
    if not res.success or res.x[-1] <= strict_tol:
        return None
    return res.x[:-1]


@dataclass(frozen=True)
class WeightedLabelSet:
    """Distinct grid selections with strictly positive weights whose planes
    each sum to 1/4."""

    labels: tuple[PieceSelection, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.weights):
            raise ValueError("labels and weights must align")
        _check_labels(self.labels)
        for w in self.weights:
            if w <= POSITIVE_WEIGHT_TOL:
                raise ValueError(f"weights must be strictly positive, got {w}")
        if abs(math.fsum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        for plane, total in enumerate(plane_weights_of(self.labels, self.weights)):
            if abs(total - 0.25) > PLANE_WEIGHT_TOL:
                raise ValueError(
                    f"plane {plane} carries weight {total}, expected 1/4"
                )


def support_set(
    labels: Sequence[PieceSelection],
    weights: Sequence[float],
    positive_tol: float = POSITIVE_WEIGHT_TOL,
) -> WeightedLabelSet:
    """The positive-weight part of a solved weight vector as a
    WeightedLabelSet (zero-weight labels dropped)."""
    kept = [
        (s, float(w))
        for s, w in zip(labels, weights)
        if w > positive_tol
    ]
    return WeightedLabelSet(
        labels=tuple(s for s, _ in kept),
        weights=tuple(w for _, w in kept),
    )


def plane_weights_of(
    labels: Sequence[PieceSelection], weights: Sequence[float]
) -> tuple[float, ...]:
    sums = [0.0] * NUM_PLANES
    for s, w in zip(labels, weights):
        for i, p in enumerate(s.picks):
            sums[4 * i + p] += w
    return tuple(sums)


def plane_weights(W: WeightedLabelSet) -> tuple[float, ...]:
    """The 12 plane totals, ordered cake 0 pieces a..d, cake 1, cake 2."""
    return plane_weights_of(W.labels, W.weights)


@dataclass(frozen=True)
class DisjointnessGraph:
    """Graph on labels with edges between disjoint selections."""

    labels: tuple[PieceSelection, ...]
    edges: frozenset[tuple[int, int]]

    def neighbors(self, t: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == t:
                out.append(b)
            elif b == t:
                out.append(a)
        return sorted(out)

    def components(self) -> list[tuple[int, ...]]:
        n = len(self.labels)
        seen = [False] * n
        comps: list[tuple[int, ...]] = []
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for start in range(n):
            if seen[start]:
                continue
            stack = [start]
            seen[start] = True
            comp = []
            while stack:
                t = stack.pop()
                comp.append(t)
                for u in adj[t]:
                    if not seen[u]:
                        seen[u] = True
                        stack.append(u)
            comps.append(tuple(sorted(comp)))
        return comps

    def max_component_size(self) -> int:
        return max(len(c) for c in self.components())

    def is_connected(self) -> bool:
        return len(self.components()) == 1


def disjointness_graph(labels: Sequence[PieceSelection]) -> DisjointnessGraph:
    _check_labels(labels)
    edges = frozenset(
        (a, b)
        for a, b in combinations(range(len(labels)), 2)
        if is_disjoint(labels[a], labels[b])
    )
    return DisjointnessGraph(labels=tuple(labels), edges=edges)


def find_diagonal(
    labels: Sequence[PieceSelection],
) -> tuple[PieceSelection, ...] | None:
    """A 4-subset hitting each plane exactly once (equivalently, pairwise
    disjoint), first found in lexicographic order of label positions."""
    _check_labels(labels)
    for quad in combinations(range(len(labels)), 4):
        if all(
            is_disjoint(labels[a], labels[b]) for a, b in combinations(quad, 2)
        ):
            return tuple(labels[t] for t in quad)
    return None


def classify_profile(
    labels: Sequence[PieceSelection],
) -> tuple[tuple[int, ...], ...]:
    """Per grid direction, the plane occupancy counts sorted descending."""
    _check_labels(labels)
    if len(labels) != 10:
        raise ValueError("profile classification needs exactly 10 labels")
    counts = [[0] * 4 for _ in range(3)]
    for s in labels:
        for i, p in enumerate(s.picks):
            counts[i][p] += 1
    return tuple(tuple(sorted(c, reverse=True)) for c in counts)


_TWO_PLUS_PROFILES = {(4, 2, 2, 2), (3, 3, 2, 2)}


def classify_case(labels: Sequence[PieceSelection]) -> str:
    """Which branch of the component-bound argument applies.

    With 10 labels and every plane holding at least two, each direction's
    occupancy profile is forced to (4,2,2,2) or (3,3,2,2); the remaining
    branches are a single-occupancy plane or (infeasibly) an empty one.
    """
    profile = classify_profile(labels)
    flat = [c for direction in profile for c in direction]
    if any(c == 0 for c in flat):
        return "empty-plane"
    if any(c == 1 for c in flat):
        return "single-vertex-plane"
    parts = sorted((tuple(d) for d in profile), reverse=True)
    if any(p not in _TWO_PLUS_PROFILES for p in parts):
        return "unhandled"
    return "|".join(str(p) for p in parts)


@dataclass
class LemmaCheckReport:
    labels: tuple[PieceSelection, ...]
    weights: tuple[float, ...]
    plane_weights: tuple[float, ...]
    case: str | None
    components: list[tuple[int, ...]]
    max_component: int
    passed: bool
    notes: list[str] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "v": 1,
            "labels": [list(s.picks) for s in self.labels],
            "weights": list(self.weights),
            "plane_weights": list(self.plane_weights),
            "case": self.case,
            "components": [list(c) for c in self.components],
            "max_component": self.max_component,
            "passed": self.passed,
            "notes": list(self.notes),
        }


def check_component_bound(
    W: WeightedLabelSet,
    context_labels: Sequence[PieceSelection] | None = None,
) -> LemmaCheckReport:
    """Component-size check for a plane-balanced weighted label set.

    The graph is taken over ``context_labels`` when given (the full label
    set of a cell whose solved weights may include zeros; it must contain
    the weighted labels) and over the weighted labels otherwise.  With ten
    weighted labels the requirement is a component of at least 6; smaller
    supports arise when the center sits on a face of the cell's image, and
    then a forced diagonal connects everything.
    """
    notes: list[str] = []
    if context_labels is not None:
        ctx = tuple(context_labels)
        missing = set(W.labels) - set(ctx)
        if missing:
            raise ValueError("context labels must contain the weighted labels")
    else:
        ctx = W.labels
    graph = disjointness_graph(ctx)
    comps = graph.components()
    max_comp = max(len(c) for c in comps)
    case = classify_case(ctx) if len(ctx) == 10 else None
    if len(W.labels) == 10:
        passed = max_comp >= MIN_COMPONENT
        notes.append("all ten labels carry positive weight")
    else:
        notes.append(
            f"support has {len(W.labels)} labels; center lies on a face of "
            f"the image simplex"
        )
        diagonal = find_diagonal(W.labels)
        if diagonal is not None:
            notes.append("support contains a diagonal")
            if len(ctx) >= MIN_COMPONENT:
                passed = max_comp >= MIN_COMPONENT
            else:
                passed = graph.is_connected()
        else:
            passed = max_comp >= MIN_COMPONENT
    return LemmaCheckReport(
        labels=ctx,
        weights=W.weights,
        plane_weights=plane_weights(W),
        case=case,
        components=comps,
        max_component=max_comp,
        passed=passed,
        notes=notes,
    )


def _strict_weights_nullspace(
    w0: np.ndarray, Z: np.ndarray, tol: float = POSITIVE_WEIGHT_TOL
) -> np.ndarray | None:
    """A strictly positive point of the affine space w0 + col(Z) when one
    exists, else None.

    Every null direction of the plane system has zero coordinate sum, so
    the minimum weight is bounded and the max-min-weight program attains
    its optimum at a vertex; small nullities are handled exactly.
    """
    r = Z.shape[1]
    if r == 0:
        return w0 if (w0 > tol).all() else None
    if r == 1:
        z = Z[:, 0]
        lo, hi = -math.inf, math.inf
        for wi, zi in zip(w0, z):
            if abs(zi) < 1e-12:
                if wi <= tol:
                    return None
            elif zi > 0:
                lo = max(lo, (tol - wi) / zi)
            else:
                hi = min(hi, (tol - wi) / zi)
        if not lo < hi:
            return None
        w = w0 + ((lo + hi) / 2.0) * z
        return w if (w > tol).all() else None
    # Maximize t subject to (w0 + Z x)_i >= t: check every basic point of
    # the (r+1)-variable program, batched.
    n = len(w0)
    rows = np.hstack([Z, -np.ones((n, 1))])
    combos = _combo_index(n, r + 1)
    M = rows[combos]  # (ncomb, r+1, r+1)
    good = np.abs(np.linalg.det(M)) > 1e-12
    if not good.any():
        return None
    sols = np.linalg.solve(M[good], -w0[combos[good]][..., None])[..., 0]
    ws = w0[None, :] + sols[:, :-1] @ Z.T
    ts = sols[:, -1]
    feasible = ws.min(axis=1) >= ts - 1e-12
    ts = np.where(feasible, ts, -np.inf)
    best = int(np.argmax(ts))
    if ts[best] <= tol:
        return None
    return ws[best]


@lru_cache(maxsize=None)
def _combo_index(n: int, k: int) -> np.ndarray:
    return np.array(list(combinations(range(n), k)), dtype=np.intp)


def _feasible_weights_exact(A: np.ndarray) -> np.ndarray | None:
    """Strictly positive weights for a covered incidence matrix, or None."""
    b = np.full(NUM_PLANES, 0.25)
    U, s, Vt = np.linalg.svd(A)
    rank = int((s > 1e-9).sum())
    w0 = Vt[:rank].T @ ((U[:, :rank].T @ b) / s[:rank])
    if np.abs(A @ w0 - b).max() > RESIDUAL_TOL:
        return None
    Z = Vt[rank:].T
    return _strict_weights_nullspace(w0, Z)


def center_cell_report() -> LemmaCheckReport:
    """Component-bound check for the mesh-1 staircase cell containing the
    center of the three-cakes-four-pieces polytope: solve the center
    weights of its labels and check the bound over all ten of them."""
    from fractions import Fraction

    from .triangulation import build

    T = build(GRID_CONFIG, 1)
    point = tuple(
        tuple(Fraction(1, k) for _ in range(k))
        for k in GRID_CONFIG.pieces_per_cake
    )
    ids = T.cells_containing(point)[0]
    labels = [
        PieceSelection(tuple(row.index(1) for row in T.vertex_matrix(v)))
        for v in ids
    ]
    weights = solve_center_weights(labels)
    if weights is None:
        raise RuntimeError("the center-containing cell must admit weights")
    support = support_set(labels, weights)
    return check_component_bound(support, context_labels=labels)


def random_plane_feasible_sets(
    seed: int, count: int, *, max_attempts: int | None = None, batch: int = 8192
) -> Iterator[WeightedLabelSet]:
    """Seeded stream of 10-label subsets of the grid admitting strictly
    positive plane-balanced weights.

    Rejection sampling: candidate subsets are drawn uniformly and filtered
    by plane coverage; weights are decided exactly.  The 12 plane equations
    generically pin the weights uniquely (batched linear solve); the
    rank-deficient minority goes through a null-space search.
    """
    rng = np.random.default_rng(seed)
    universe = GRID_CONFIG.selection_list()
    incidence = plane_incidence(universe)  # (12, 64)
    b = np.full(NUM_PLANES, 0.25)
    produced = 0
    attempts = 0
    while produced < count:
        if max_attempts is not None and attempts > max_attempts:
            raise RuntimeError(
                f"exhausted {max_attempts} attempts after {produced} sets"
            )
        attempts += batch
        # Each row: 10 distinct label indices (smallest ranks of a random
        # permutation), sorted for a canonical presentation.
        ranks = rng.random((batch, len(universe)))
        picks = np.sort(np.argpartition(ranks, 10, axis=1)[:, :10], axis=1)
        A = incidence.T[picks].transpose(0, 2, 1)  # (batch, 12, 10)
        covered = (A.sum(axis=2) > 0).all(axis=1)
        idx = np.nonzero(covered)[0]
        if idx.size == 0:
            continue
        Ac = A[idx]
        gram = np.einsum("bpi,bpj->bij", Ac, Ac)
        rhs = np.einsum("bpi,p->bi", Ac, b)
        # Gram matrices have integer entries, so a tiny determinant means
        # exactly rank-deficient.
        singular = np.abs(np.linalg.det(gram)) < 1e-6
        weights = np.full((idx.size, 10), -1.0)
        if (~singular).any():
            weights[~singular] = np.linalg.solve(
                gram[~singular], rhs[~singular][..., None]
            )[..., 0]
        residual = np.abs(
            np.einsum("bpi,bi->bp", Ac, weights) - b
        ).max(axis=1)
        unique_ok = (
            (~singular)
            & (residual <= RESIDUAL_TOL)
            & (weights > POSITIVE_WEIGHT_TOL).all(axis=1)
        )
        # Rank-deficient candidates: batched SVD, then a null-space search
        # only for the consistent ones.
        sing_rows = np.nonzero(singular)[0]
        sing_solutions: dict[int, np.ndarray] = {}
        if sing_rows.size:
            U, S, Vt = np.linalg.svd(Ac[sing_rows])
            coef = np.einsum("bij,i->bj", U[:, :, :10], b)
            keep = S > 1e-9
            scaled = np.where(keep, coef / np.where(keep, S, 1.0), 0.0)
            w0s = np.einsum("bkj,bk->bj", Vt, scaled)
            resid = np.abs(
                np.einsum("bpi,bi->bp", Ac[sing_rows], w0s) - b
            ).max(axis=1)
            for pos, row in enumerate(sing_rows):
                if resid[pos] > RESIDUAL_TOL:
                    continue
                rank = int(keep[pos].sum())
                Z = Vt[pos, rank:].T
                w = _strict_weights_nullspace(w0s[pos], Z)
                if w is not None:
                    sing_solutions[int(row)] = w
        for row in range(idx.size):
            if produced >= count:
                return
            if unique_ok[row]:
                w = weights[row]
            elif row in sing_solutions:
                w = sing_solutions[row]
            else:
                continue
            labels = tuple(universe[t] for t in picks[idx[row]])
            produced += 1
            yield WeightedLabelSet(
                labels=labels, weights=tuple(float(x) for x in w)
            )
