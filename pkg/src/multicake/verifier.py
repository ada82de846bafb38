"""Brute-force ground truth: per-division envy reports, Pareto checks, and
exhaustive grid sweeps over all divisions with entries in (1/G)-steps.

The sweep is a finite corroboration at resolution 1/G of statements about
the continuum, never a proof of them; certificates carry G explicitly.
Model-specific exact integer kernels keep large sweeps fast; anything else
falls back to a generic per-division path.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .geometry import (
    CakeConfig,
    Division,
    PieceSelection,
    is_disjoint,
)
from .preferences import PreferenceModel, _selections

CERTIFY_NONE = "certify_none"
COLLECT = "collect"

DEFAULT_DIVISION_CAP = 10**8
DEFAULT_CHUNK = 32768


# ---- preferred sets and envy reports ----


def preferred_set(model: PreferenceModel, division: Division) -> list[PieceSelection]:
    """Every selection in the argmax set (ties preserved, unlike prefer)."""
    sels = _selections(tuple(len(r) for r in division.rows))
    utils = model.utilities(division)
    best = max(utils)
    if best == -math.inf:
        raise ValueError("model rejected every selection")
    return [s for s, u in zip(sels, utils) if u == best]


@dataclass(frozen=True)
class PlayerEnvy:
    allocated: PieceSelection
    allocated_utility: float
    best_selection: PieceSelection
    best_utility: float
    gap: float
    normalized_gap: float


@dataclass(frozen=True)
class EnvyReport:
    players: dict[int, PlayerEnvy]
    disjoint: bool
    pareto: bool
    delta: float

    def to_jsonable(self) -> dict:
        return {
            "v": 1,
            "players": {
                str(p): {
                    "allocated": list(e.allocated.picks),
                    "allocated_utility": e.allocated_utility,
                    "best_selection": list(e.best_selection.picks),
                    "best_utility": e.best_utility,
                    "gap": e.gap,
                    "normalized_gap": e.normalized_gap,
                }
                for p, e in sorted(self.players.items())
            },
            "disjoint": self.disjoint,
            "pareto": self.pareto,
            "delta": self.delta,
        }


def envy_report(
    division: Division,
    allocation: Mapping[int, PieceSelection],
    models: Mapping[int, PreferenceModel],
) -> EnvyReport:
    """Exhaustive comparison of each player's allocated selection against
    every selection of the division.

    The envy gap is normalized by the player's utility range over
    acceptable selections at this division, so a tolerance on the
    normalized delta is scale-free across models.
    """
    ks = tuple(len(r) for r in division.rows)
    sels = _selections(ks)
    index = {s: t for t, s in enumerate(sels)}
    players: dict[int, PlayerEnvy] = {}
    all_utils: dict[int, list[float]] = {}
    delta = 0.0
    for p in sorted(allocation):
        model = models[p]
        utils = model.utilities(division)
        all_utils[p] = utils
        best_t = max(range(len(sels)), key=lambda t: (utils[t], -t))
        best_u = utils[best_t]
        alloc = allocation[p]
        alloc_u = utils[index[alloc]]
        gap = max(0.0, best_u - alloc_u)
        finite = [u for u in utils if u > -math.inf]
        span = best_u - min(finite)
        if gap == 0.0:
            norm = 0.0
        elif span > 0.0 and gap < math.inf:
            norm = gap / span
        else:
            norm = math.inf
        players[p] = PlayerEnvy(
            allocated=alloc,
            allocated_utility=alloc_u,
            best_selection=sels[best_t],
            best_utility=best_u,
            gap=gap,
            normalized_gap=norm,
        )
        delta = max(delta, norm)
    alloc_list = [allocation[p] for p in sorted(allocation)]
    disjoint = all(
        is_disjoint(a, b)
        for i, a in enumerate(alloc_list)
        for b in alloc_list[i + 1 :]
    )
    pareto = _pareto_optimal(sorted(allocation), all_utils, allocation, index, sels)
    return EnvyReport(players=players, disjoint=disjoint, pareto=pareto, delta=delta)


def _pareto_optimal(
    player_order: list[int],
    all_utils: dict[int, list[float]],
    allocation: Mapping[int, PieceSelection],
    index: Mapping[PieceSelection, int],
    sels: Sequence[PieceSelection],
) -> bool:
    """True iff no assignment of pairwise-disjoint selections weakly
    improves every player and strictly improves one, at this division."""
    current = [all_utils[p][index[allocation[p]]] for p in player_order]

    def search(pos: int, chosen: list[PieceSelection], any_strict: bool) -> bool:
        if pos == len(player_order):
            return any_strict
        p = player_order[pos]
        utils = all_utils[p]
        for t, s in enumerate(sels):
            if utils[t] < current[pos]:
                continue
            if any(not is_disjoint(s, c) for c in chosen):
                continue
            if search(pos + 1, chosen + [s], any_strict or utils[t] > current[pos]):
                return True
        return False

    return not search(0, [], False)


# ---- grid sweeps ----


@dataclass
class SweepCertificate:
    config: CakeConfig
    model_specs: list[dict]
    grid: int
    mode: str
    divisions_examined: int
    solutions_found: int
    examples: list[dict] = field(default_factory=list)
    runtime_seconds: float = 0.0
    certified: bool | None = None
    witness: dict | None = None

    def to_jsonable(self) -> dict:
        return {
            "v": 1,
            "config": list(self.config.pieces_per_cake),
            "models": self.model_specs,
            "grid": self.grid,
            "mode": self.mode,
            "divisions_examined": self.divisions_examined,
            "solutions_found": self.solutions_found,
            "examples": self.examples,
            "runtime_seconds": self.runtime_seconds,
            "certified": self.certified,
            "witness": self.witness,
        }


def sweep_division_count(config: CakeConfig, G: int) -> int:
    """Number of divisions whose entries are multiples of 1/G."""
    return math.prod(
        math.comb(G + k - 1, k - 1) for k in config.pieces_per_cake
    )


@lru_cache(maxsize=None)
def _composition_table(total: int, parts: int) -> np.ndarray:
    def gen(t: int, n: int):
        if n == 1:
            yield (t,)
            return
        for head in range(t + 1):
            for tail in gen(t - head, n - 1):
                yield (head,) + tail

    return np.array(list(gen(total, parts)), dtype=np.int64)


@lru_cache(maxsize=None)
def _disjoint_matrix(ks: tuple[int, ...]) -> np.ndarray:
    sels = _selections(ks)
    n = len(sels)
    out = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(n):
            out[a, b] = all(
                x != y for x, y in zip(sels[a].picks, sels[b].picks)
            )
    return out


def _decode_chunk(
    tables: list[np.ndarray], lo: int, hi: int
) -> list[np.ndarray]:
    """Rows lo..hi of the lexicographic enumeration of grid divisions, as
    per-cake integer unit arrays."""
    idx = np.arange(lo, hi, dtype=np.int64)
    per_cake = []
    for table in reversed(tables):
        size = len(table)
        per_cake.append(idx % size)
        idx //= size
    per_cake.reverse()
    return [table[ix] for table, ix in zip(tables, per_cake)]


def _generic_mask(
    model: PreferenceModel, ys: list[np.ndarray], G: int
) -> np.ndarray:
    batch = ys[0].shape[0]
    nsel = math.prod(y.shape[1] for y in ys)
    out = np.zeros((batch, nsel), dtype=bool)
    for r in range(batch):
        rows = tuple(
            tuple(float(u) / G for u in y[r]) for y in ys
        )
        utils = model.utilities(Division(rows))
        best = max(utils)
        for t, u in enumerate(utils):
            out[r, t] = u == best
    return out


def _model_mask(model: PreferenceModel, ys: list[np.ndarray], G: int) -> np.ndarray:
    mask = model.grid_argmax_mask(ys, G)
    if mask is None:
        mask = _generic_mask(model, ys, G)
    return mask


def _sweep_chunk(payload) -> tuple[int, list[tuple[int, list[int], list[int]]]]:
    """Pure worker: scan divisions lo..hi, return (hit count, hits).

    Each hit is (division index, argmax indices of player 0, of player 1);
    hits beyond the per-chunk cap are counted but not materialized.
    """
    config, models, G, lo, hi, cap = payload
    tables = [_composition_table(G, k) for k in config.pieces_per_cake]
    ys = _decode_chunk(tables, lo, hi)
    mask0 = _model_mask(models[0], ys, G)
    mask1 = _model_mask(models[1], ys, G)
    disj = _disjoint_matrix(config.pieces_per_cake)
    reach = (mask0.astype(np.int16) @ disj.astype(np.int16)) > 0
    hit_rows = np.nonzero((reach & mask1).any(axis=1))[0]
    hits = []
    for r in hit_rows[:cap]:
        hits.append(
            (
                lo + int(r),
                [int(t) for t in np.nonzero(mask0[r])[0]],
                [int(t) for t in np.nonzero(mask1[r])[0]],
            )
        )
    return len(hit_rows), hits


def _division_at(config: CakeConfig, G: int, idx: int) -> Division:
    tables = [_composition_table(G, k) for k in config.pieces_per_cake]
    comps = []
    for table in reversed(tables):
        size = len(table)
        comps.append(table[idx % size])
        idx //= size
    comps.reverse()
    return Division(
        tuple(tuple(float(u) / G for u in comp) for comp in comps)
    )


def grid_sweep(
    config: CakeConfig,
    models: Mapping[int, PreferenceModel],
    G: int,
    mode: str = CERTIFY_NONE,
    *,
    threads: int = 1,
    cap: int = DEFAULT_DIVISION_CAP,
    collect_limit: int = 1000,
    chunk: int = DEFAULT_CHUNK,
) -> SweepCertificate:
    """Enumerate every division with entries in (1/G)-steps; for each, test
    whether any cross pair of the two players' most-preferred selections is
    disjoint.  CERTIFY_NONE stops at the first such division and reports it
    as a witness; COLLECT gathers them all (examples capped)."""
    if G < 1:
        raise ValueError("grid resolution must be >= 1")
    if mode not in (CERTIFY_NONE, COLLECT):
        raise ValueError(f"unknown sweep mode {mode!r}")
    total = sweep_division_count(config, G)
    if total > cap:
        raise ValueError(
            f"sweep would examine {total} divisions, exceeding cap {cap}"
        )
    model_pair = (models[0], models[1])
    t0 = time.perf_counter()
    ranges = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    payloads = [
        (config, model_pair, G, lo, hi, collect_limit) for lo, hi in ranges
    ]

    found = 0
    examples: list[dict] = []
    witness: dict | None = None
    examined = 0

    def consume(results: Iterator) -> None:
        nonlocal found, witness, examined
        for (lo, hi), (count, hits) in zip(ranges, results):
            examined = hi
            found += count
            for idx, t0s, t1s in hits:
                if len(examples) >= collect_limit:
                    break
                examples.append(_hit_record(config, models, G, idx, t0s, t1s))
            if found and witness is None:
                witness = examples[0] if examples else None
            if mode == CERTIFY_NONE and found:
                return

    if threads > 1 and len(payloads) > 1:
        import multiprocessing

        with multiprocessing.Pool(processes=threads) as pool:
            results = pool.imap(_sweep_chunk, payloads)
            consume(iter(results))
            pool.terminate()
    else:
        consume(_sweep_chunk(p) for p in payloads)

    runtime = time.perf_counter() - t0
    if mode == CERTIFY_NONE:
        certified = found == 0
        examined_total = total if certified else examined
    else:
        certified = None
        examined_total = total
    return SweepCertificate(
        config=config,
        model_specs=[models[0].spec(), models[1].spec()],
        grid=G,
        mode=mode,
        divisions_examined=examined_total,
        solutions_found=found,
        examples=examples,
        runtime_seconds=runtime,
        certified=certified,
        witness=witness,
    )


def _hit_record(
    config: CakeConfig,
    models: Mapping[int, PreferenceModel],
    G: int,
    idx: int,
    t0s: list[int],
    t1s: list[int],
) -> dict:
    sels = _selections(config.pieces_per_cake)
    division = _division_at(config, G, idx)
    disj = _disjoint_matrix(config.pieces_per_cake)
    pairs = [
        [list(sels[a].picks), list(sels[b].picks)]
        for a in t0s
        for b in t1s
        if disj[a, b]
    ]
    return {
        "division": division.to_jsonable(),
        "player0_preferred": [list(sels[t].picks) for t in t0s],
        "player1_preferred": [list(sels[t].picks) for t in t1s],
        "disjoint_pairs": pairs,
    }


def sweep_hits_csv(
    certificate: SweepCertificate, models: Mapping[int, PreferenceModel], path
) -> None:
    """One CSV row per disjoint pair of a collected hit: division entries,
    the two selections, and both utilities when the models expose them."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["division", "player0_selection", "player1_selection", "u0", "u1"]
        )
        for ex in certificate.examples:
            division = Division(
                tuple(tuple(row) for row in ex["division"])
            )
            for sa, sb in ex["disjoint_pairs"]:
                try:
                    u0 = models[0].utility(division, PieceSelection(tuple(sa)))
                    u1 = models[1].utility(division, PieceSelection(tuple(sb)))
                except TypeError:
                    u0 = u1 = ""
                writer.writerow(
                    [ex["division"], sa, sb, u0, u1]
                )
