"""Preference models: deterministic oracles answering "which piece selection
do you prefer in this division?".

Every model obeys three contracts:

* independence -- the answer depends only on the division;
* hungry -- a preferred selection never contains a zero-length piece
  (each cake always offers a positive piece, so an admissible selection
  always exists);
* determinism -- bit-identical divisions give identical answers.

Ties are always broken lexicographically on pick vectors.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .geometry import (
    CakeConfig,
    Division,
    PieceSelection,
    make_selection,
)

LatticeKey = tuple[int, tuple[tuple[int, ...], ...]]

ROLE_A = "A"
ROLE_B = "B"
MODE_SAME = "same"
MODE_DIFFERENT = "different"


class QueryRequired(Exception):
    """A scripted or human-backed oracle has no recorded answer for this
    division; the caller must obtain one."""

    def __init__(self, division: Division, key: LatticeKey):
        super().__init__(f"no recorded answer for division key {key}")
        self.division = division
        self.key = key


@lru_cache(maxsize=None)
def _selections(ks: tuple[int, ...]) -> tuple[PieceSelection, ...]:
    return tuple(CakeConfig(ks).selections())


def _shape(division: Division) -> tuple[int, ...]:
    return tuple(len(r) for r in division.rows)


class PreferenceModel:
    """Base contract: a utility over (division, selection) plus an argmax
    rule with lexicographic tie-breaking."""

    kind: str = "abstract"
    interactive: bool = False

    def utility(self, division: Division, selection: PieceSelection) -> float:
        raise NotImplementedError

    def utilities(self, division: Division) -> list[float]:
        """Utility of every selection, in lexicographic order; -inf marks
        selections the player would never accept."""
        return [
            self.utility(division, s) for s in _selections(_shape(division))
        ]

    def prefer(
        self, division: Division, *, key: LatticeKey | None = None
    ) -> PieceSelection:
        """Most-preferred selection; earliest in lexicographic order among
        ties.  ``key`` is the exact rational identity of the division, used
        only by recorded oracles."""
        best_s = None
        best_u = -math.inf
        for s in _selections(_shape(division)):
            u = self.utility(division, s)
            if u > best_u:
                best_u = u
                best_s = s
        if best_s is None or best_u == -math.inf:
            raise ValueError("model rejected every selection")
        return best_s

    def grid_argmax_mask(
        self, ys: Sequence[np.ndarray], G: int
    ) -> np.ndarray | None:
        """Optional vectorized argmax over a batch of grid divisions.

        ``ys[i]`` holds integer piece units of cake ``i`` (rows sum to G),
        shape (batch, k_i).  Returns a boolean (batch, n_selections) mask of
        the full argmax set, or None when no exact fast path exists.
        """
        return None

    def spec(self) -> dict:
        raise NotImplementedError


def _picks_per_cake(ks: tuple[int, ...]) -> list[np.ndarray]:
    sels = _selections(ks)
    return [
        np.array([s.picks[i] for s in sels], dtype=np.int64)
        for i in range(len(ks))
    ]


# ---- two cakes, two pieces: linked bonus preferences ----


@dataclass(frozen=True)
class LinkedBonusModel(PreferenceModel):
    """Sum of selected piece lengths plus a bonus when the two picks match
    (mode "same") or differ (mode "different").  Defined for two cakes of
    two pieces each."""

    beta: float
    mode: str

    kind = "linked_bonus"

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0,1), got {self.beta}")
        if self.mode not in (MODE_SAME, MODE_DIFFERENT):
            raise ValueError(f"mode must be 'same' or 'different', got {self.mode!r}")

    def _check_shape(self, ks: tuple[int, ...]) -> None:
        if ks != (2, 2):
            raise ValueError(
                f"linked_bonus is defined for two cakes of two pieces, got {ks}"
            )

    def utility(self, division: Division, selection: PieceSelection) -> float:
        self._check_shape(_shape(division))
        lengths = division.piece_lengths(selection)
        if any(x <= 0.0 for x in lengths):
            return -math.inf
        matched = selection.picks[0] == selection.picks[1]
        bonus = self.beta if matched == (self.mode == MODE_SAME) else 0.0
        return lengths[0] + lengths[1] + bonus

    def grid_argmax_mask(self, ys, G):
        self._check_shape((ys[0].shape[1], ys[1].shape[1]))
        frac = Fraction(self.beta)
        if frac.denominator * 2 * G + frac.numerator * G > 2**60:
            return None
        sels = _selections((2, 2))
        picks = _picks_per_cake((2, 2))
        den = frac.denominator
        bonus = np.array(
            [
                frac.numerator * G
                if (s.picks[0] == s.picks[1]) == (self.mode == MODE_SAME)
                else 0
                for s in sels
            ],
            dtype=np.int64,
        )
        units = den * (ys[0][:, picks[0]] + ys[1][:, picks[1]]) + bonus[None, :]
        admissible = (ys[0][:, picks[0]] > 0) & (ys[1][:, picks[1]] > 0)
        key = np.where(admissible, units, np.int64(-1))
        return key == key.max(axis=1, keepdims=True)

    def spec(self) -> dict:
        return {"kind": self.kind, "beta": self.beta, "mode": self.mode}


def linked_bonus_model(beta: float, mode: str) -> LinkedBonusModel:
    return LinkedBonusModel(beta=beta, mode=mode)


# ---- category-ranked preferences (shared machinery) ----


class _CategoryModel(PreferenceModel):
    """Preferences ranked by broad categories of pick patterns.

    A selection is acceptable only if all its pieces are at least epsilon
    long.  Within the highest-ranked category containing an acceptable
    option, the player takes the option of greatest total size, earliest
    lexicographic on ties.  The encoded utility (category bonus plus total
    size) has the same argmax.
    """

    role: str
    epsilon: float

    def _shape_expected(self) -> tuple[int, ...]:
        raise NotImplementedError

    def _category_count(self) -> int:
        raise NotImplementedError

    def _category_rank(self, picks: tuple[int, ...]) -> int:
        """0 = most preferred category for this model's role."""
        raise NotImplementedError

    def _check_shape(self, ks: tuple[int, ...]) -> None:
        if ks != self._shape_expected():
            raise ValueError(
                f"model is defined for configuration {self._shape_expected()}, got {ks}"
            )

    def utility(self, division: Division, selection: PieceSelection) -> float:
        self._check_shape(_shape(division))
        lengths = division.piece_lengths(selection)
        if any(x < self.epsilon for x in lengths):
            return -math.inf
        m = len(lengths)
        rank = self._category_rank(selection.picks)
        return (self._category_count() - 1 - rank) * (m + 1) + math.fsum(lengths)

    def grid_argmax_mask(self, ys, G):
        ks = self._shape_expected()
        self._check_shape(tuple(y.shape[1] for y in ys))
        sels = _selections(ks)
        picks = _picks_per_cake(ks)
        m = len(ks)
        # Exact unit threshold: smallest integer y with y/G >= epsilon.
        eps = Fraction(self.epsilon)
        thresh = -((-eps.numerator * G) // eps.denominator)
        bonus = np.array(
            [
                (self._category_count() - 1 - self._category_rank(s.picks))
                * (m * G + 1)
                for s in sels
            ],
            dtype=np.int64,
        )
        totals = np.zeros((ys[0].shape[0], len(sels)), dtype=np.int64)
        admissible = np.ones_like(totals, dtype=bool)
        for i in range(m):
            gathered = ys[i][:, picks[i]]
            totals += gathered
            admissible &= gathered >= thresh
        key = np.where(admissible, bonus[None, :] + totals, np.int64(-1))
        return key == key.max(axis=1, keepdims=True)


def _pattern(picks: tuple[int, ...]) -> tuple[int, ...]:
    """Multiplicities of repeated picks, sorted descending: (3,) means all
    three match, (2, 1) means one pair, etc."""
    counts: dict[int, int] = {}
    for p in picks:
        counts[p] = counts.get(p, 0) + 1
    return tuple(sorted(counts.values(), reverse=True))


@dataclass(frozen=True)
class EpsilonCategoryModel(_CategoryModel):
    """Three cakes, three pieces.  Role "A" ranks: all picks the same type,
    then exactly two the same, then all different; role "B" the reverse."""

    epsilon: float = 0.1
    role: str = ROLE_A

    kind = "epsilon_category"
    _RANKS = {(3,): 0, (2, 1): 1, (1, 1, 1): 2}

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0 / 3.0:
            raise ValueError(
                f"epsilon must be in (0, 1/3) so an acceptable option always "
                f"exists, got {self.epsilon}"
            )
        if self.role not in (ROLE_A, ROLE_B):
            raise ValueError(f"role must be 'A' or 'B', got {self.role!r}")

    def _shape_expected(self):
        return (3, 3, 3)

    def _category_count(self):
        return 3

    def _category_rank(self, picks):
        rank = self._RANKS[_pattern(picks)]
        return rank if self.role == ROLE_A else 2 - rank

    def spec(self) -> dict:
        return {"kind": self.kind, "epsilon": self.epsilon, "role": self.role}


def epsilon_category_prefer(
    model: EpsilonCategoryModel, division: Division
) -> PieceSelection:
    return model.prefer(division)


@dataclass(frozen=True)
class PokerModel(_CategoryModel):
    """Four cakes, four pieces.  Role "A" ranks pick patterns like poker
    hands: four of a kind, three of a kind, two pair, one pair, all
    different; role "B" the reverse."""

    role: str = ROLE_A
    epsilon: float = 0.1

    kind = "poker"
    _RANKS = {(4,): 0, (3, 1): 1, (2, 2): 2, (2, 1, 1): 3, (1, 1, 1, 1): 4}

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 0.25:
            raise ValueError(
                f"epsilon must be in (0, 1/4) so an acceptable option always "
                f"exists, got {self.epsilon}"
            )
        if self.role not in (ROLE_A, ROLE_B):
            raise ValueError(f"role must be 'A' or 'B', got {self.role!r}")

    def _shape_expected(self):
        return (4, 4, 4, 4)

    def _category_count(self):
        return 5

    def _category_rank(self, picks):
        rank = self._RANKS[_pattern(picks)]
        return rank if self.role == ROLE_A else 4 - rank

    def spec(self) -> dict:
        return {"kind": self.kind, "role": self.role, "epsilon": self.epsilon}


def poker_model(role: str, epsilon: float = 0.1) -> PokerModel:
    return PokerModel(role=role, epsilon=epsilon)


# ---- seeded random hungry models ----


def _hash_unit(*ints: int) -> float:
    """Deterministic uniform value in [0, 1) derived from integer labels.
    Stable across processes, platforms and library versions."""
    payload = struct.pack(f">{len(ints)}q", *ints)
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


@lru_cache(maxsize=None)
def _log_params(
    seed: int, linkage_milli: int, ks: tuple[int, ...]
) -> tuple[tuple[tuple[float, ...], ...], dict]:
    strength = linkage_milli / 1000.0
    weights = tuple(
        tuple(0.5 + _hash_unit(seed, 0, i, j) for j in range(k))
        for i, k in enumerate(ks)
    )
    linkage: dict[tuple[int, int], tuple[tuple[float, ...], ...]] = {}
    m = len(ks)
    for i in range(m):
        for i2 in range(i + 1, m):
            linkage[(i, i2)] = tuple(
                tuple(
                    strength * (_hash_unit(seed, 1, i, i2, a, b) - 0.5)
                    for b in range(ks[i2])
                )
                for a in range(ks[i])
            )
    return weights, linkage


@dataclass(frozen=True)
class LogUtilityModel(PreferenceModel):
    """Weighted log piece lengths plus pairwise linkage bonuses between the
    picks of different cakes.  Works on any configuration; parameters are
    derived deterministically from the seed and the configuration."""

    seed: int
    linkage_strength: float = 1.0

    kind = "log_utility"

    def _params(self, ks: tuple[int, ...]):
        return _log_params(self.seed, round(self.linkage_strength * 1000), ks)

    def utility(self, division: Division, selection: PieceSelection) -> float:
        ks = _shape(division)
        weights, linkage = self._params(ks)
        total = 0.0
        for i, p in enumerate(selection.picks):
            x = division.rows[i][p]
            if x <= 0.0:
                return -math.inf
            total += weights[i][p] * math.log(x)
        picks = selection.picks
        for (i, i2), table in linkage.items():
            total += table[picks[i]][picks[i2]]
        return total

    def utilities(self, division: Division) -> list[float]:
        ks = _shape(division)
        weights, linkage = self._params(ks)
        logs = [
            [math.log(x) if x > 0.0 else -math.inf for x in row]
            for row in division.rows
        ]
        out = []
        for s in _selections(ks):
            picks = s.picks
            total = 0.0
            dead = False
            for i, p in enumerate(picks):
                lx = logs[i][p]
                if lx == -math.inf:
                    dead = True
                    break
                total += weights[i][p] * lx
            if dead:
                out.append(-math.inf)
                continue
            for (i, i2), table in linkage.items():
                total += table[picks[i]][picks[i2]]
            out.append(total)
        return out

    def grid_argmax_mask(self, ys, G):
        ks = tuple(y.shape[1] for y in ys)
        weights, linkage = self._params(ks)
        sels = _selections(ks)
        picks = _picks_per_cake(ks)
        const = np.zeros(len(sels))
        for (i, i2), table in linkage.items():
            const += np.array(
                [table[s.picks[i]][s.picks[i2]] for s in sels]
            )
        u = np.broadcast_to(const, (ys[0].shape[0], len(sels))).copy()
        for i, k in enumerate(ks):
            y = ys[i]
            with np.errstate(divide="ignore"):
                logs = np.where(y > 0, np.log(y / G), -np.inf)
            w = np.array(weights[i])
            u += logs[:, picks[i]] * w[picks[i]][None, :]
        return u == u.max(axis=1, keepdims=True)

    def spec(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "linkage_strength": self.linkage_strength,
        }


def log_utility_model(seed: int, linkage_strength: float = 1.0) -> LogUtilityModel:
    return LogUtilityModel(seed=seed, linkage_strength=linkage_strength)


# ---- recorded / human-backed oracles ----


@dataclass
class ScriptedOracle(PreferenceModel):
    """Answers from a recorded map keyed by the exact rational identity of
    the division.  Raises QueryRequired for unrecorded divisions -- the
    session server turns that into a pending query for a human player."""

    answers: dict[LatticeKey, PieceSelection] = field(default_factory=dict)
    interactive: bool = False

    kind = "scripted"

    def prefer(
        self, division: Division, *, key: LatticeKey | None = None
    ) -> PieceSelection:
        if key is None:
            raise ValueError(
                "scripted oracles answer only at exact rational divisions; "
                "pass the division's lattice key"
            )
        got = self.answers.get(key)
        if got is not None:
            return got
        raise QueryRequired(division, key)

    def utility(self, division: Division, selection: PieceSelection) -> float:
        raise TypeError("scripted oracles reveal choices, not utilities")

    @staticmethod
    def validate_answer(division: Division, selection: PieceSelection) -> None:
        """Reject answers naming a zero-length piece: a positive piece
        always exists on every cake, so such an answer can never be a
        most-preferred selection."""
        config = division.config()
        selection = make_selection(config, selection.picks)
        for i, p in enumerate(selection.picks):
            if division.rows[i][p] <= 0.0:
                raise ValueError(
                    f"cake {i}: piece {p} has zero length here; a nonempty "
                    f"piece is always available"
                )

    def record(
        self,
        division: Division,
        key: LatticeKey,
        selection: PieceSelection,
    ) -> None:
        self.validate_answer(division, selection)
        existing = self.answers.get(key)
        if existing is not None and existing != selection:
            raise ValueError(
                f"division already answered with {existing.picks}, refusing "
                f"conflicting {selection.picks}"
            )
        self.answers[key] = selection

    def spec(self) -> dict:
        return {"kind": "human" if self.interactive else "scripted"}


def scripted_oracle(
    answers: Mapping[LatticeKey, PieceSelection]
) -> ScriptedOracle:
    return ScriptedOracle(answers=dict(answers))


def human_oracle() -> ScriptedOracle:
    oracle = ScriptedOracle()
    oracle.interactive = True
    return oracle


# ---- model specification JSON ----


def model_from_spec(spec: Mapping) -> PreferenceModel:
    """Build a model from its JSON specification."""
    kind = spec.get("kind")
    if kind == "linked_bonus":
        return LinkedBonusModel(beta=float(spec["beta"]), mode=str(spec["mode"]))
    if kind == "epsilon_category":
        return EpsilonCategoryModel(
            epsilon=float(spec.get("epsilon", 0.1)), role=str(spec.get("role", ROLE_A))
        )
    if kind == "poker":
        return PokerModel(
            role=str(spec.get("role", ROLE_A)),
            epsilon=float(spec.get("epsilon", 0.1)),
        )
    if kind == "log_utility":
        return LogUtilityModel(
            seed=int(spec["seed"]),
            linkage_strength=float(spec.get("linkage_strength", 1.0)),
        )
    if kind == "human":
        return human_oracle()
    if kind == "scripted":
        oracle = ScriptedOracle()
        for entry in spec.get("answers", []):
            den = int(entry["denominator"])
            rows = tuple(tuple(int(y) for y in row) for row in entry["rows"])
            oracle.answers[(den, rows)] = PieceSelection(
                tuple(int(p) for p in entry["selection"])
            )
        return oracle
    raise ValueError(f"unknown model kind {kind!r}")
