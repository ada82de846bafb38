"""Interactive session server: runs the preference-query protocol against
real players over HTTP/WebSocket and drives the full-cell search with their
answers.

The solver core is a deterministic function of (configuration, schedule,
recorded answers): every state change re-runs it from scratch against the
session's answer cache and stops at the first unanswered query.  Replaying
a finished session's answers therefore reproduces the identical report,
bit for bit.
"""

from __future__ import annotations

import json
import math
import threading

import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .geometry import (
    CakeConfig,
    Division,
    PieceSelection,
    division_of_key,
    make_selection,
    rational_division_key,
)
from .preferences import (
    LatticeKey,
    PreferenceModel,
    QueryRequired,
    ScriptedOracle,
    model_from_spec,
)
from .sperner import (
    LabeledTriangulation,
    SolveReport,
    _disjoint_owner_edge_positions,
    FullCell,
)
from .triangulation import Triangulation, assign_owners, build
from . import verifier

PROTOCOL_VERSION = 1
INTERACTIVE_QUERY_BUDGET = 200


# ---- deterministic interactive drive ----


@dataclass
class PendingQuery:
    id: str
    player: int
    mesh: int
    division: Division
    key: LatticeKey
    admissible: list[PieceSelection]
    kind: str  # "label" or "confirm"
    allocated: PieceSelection | None = None

    def to_jsonable(self) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "id": self.id,
            "player": self.player,
            "mesh": self.mesh,
            "division": self.division.to_jsonable(),
            "key": _key_to_jsonable(self.key),
            "admissible": [list(s.picks) for s in self.admissible],
            "kind": self.kind,
            "allocated": list(self.allocated.picks) if self.allocated else None,
        }


@dataclass
class DriveOutcome:
    status: str  # "querying" | "solved" | "failed"
    pending: dict[int, PendingQuery]
    report: SolveReport | None
    mesh: int
    cells_scanned: int


def _admissible_selections(division: Division) -> list[PieceSelection]:
    config = division.config()
    return [
        s
        for s in config.selections()
        if all(division.rows[i][p] > 0.0 for i, p in enumerate(s.picks))
    ]


def _division_key_of(T: Triangulation, va: int, vb: int) -> LatticeKey:
    rows_a = T.vertex_matrix(va)
    rows_b = T.vertex_matrix(vb)
    summed = tuple(
        tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(rows_a, rows_b)
    )
    return rational_division_key(summed, 2 * T.mesh)


def _center_distance_key(T: Triangulation, ids: tuple[int, ...]) -> float:
    config = T.config
    bary = T.cell_barycenter(ids)
    return math.fsum(
        (x - 1.0 / k) ** 2
        for row, k in zip(bary.rows, config.pieces_per_cake)
        for x in row
    )


def drive(
    config: CakeConfig,
    schedule: Sequence[int],
    oracles: Mapping[int, PreferenceModel],
) -> DriveOutcome:
    """One deterministic pass of the interactive search.

    Scans cells center-outward at each mesh of the schedule; stops at the
    first cell needing an unanswered human label (issuing at most one query
    per player, all from that cell), or at an unconfirmed candidate.  A
    candidate division (disjoint owner edge midpoint) is accepted only when
    every allocated player confirms it as their most-preferred selection
    there -- a direct finite check of envy-freeness at the output division.
    """
    last_mesh = schedule[0]
    cells_scanned = 0
    for N in schedule:
        last_mesh = N
        T = build(config, N)
        owners = assign_owners(T, 2)
        LT = LabeledTriangulation(T, owners, oracles)
        order = sorted(
            T.cell_vertex_ids(),
            key=lambda ids: (_center_distance_key(T, ids), ids),
        )
        cells_scanned = 0
        for cell_index, ids in enumerate(order):
            pending: dict[int, PendingQuery] = {}
            for vid in sorted(ids):
                try:
                    LT.label(vid)
                except QueryRequired as q:
                    player = owners[vid]
                    if player not in pending:
                        pending[player] = PendingQuery(
                            id=f"v{N}:{vid}",
                            player=player,
                            mesh=N,
                            division=q.division,
                            key=q.key,
                            admissible=_admissible_selections(q.division),
                            kind="label",
                        )
            if pending:
                return DriveOutcome(
                    status="querying",
                    pending=pending,
                    report=None,
                    mesh=N,
                    cells_scanned=cells_scanned,
                )
            cells_scanned += 1
            idxs = [LT.label_index(v) for v in ids]
            if len(set(idxs)) != len(ids):
                continue
            fc = FullCell(
                vertex_ids=ids,
                labels=tuple(LT._labels[v] for v in ids),
                owners=tuple(owners[v] for v in ids),
            )
            pos = _disjoint_owner_edge_positions(fc)
            if pos is None:
                continue
            a, b = pos
            va, vb = ids[a], ids[b]
            key = _division_key_of(T, va, vb)
            den, rows = key
            candidate = Division(
                tuple(tuple(y / den for y in row) for row in rows)
            )
            allocation = {fc.owners[a]: fc.labels[a], fc.owners[b]: fc.labels[b]}
            confirmations: dict[int, PieceSelection] = {}
            for player in sorted(allocation):
                try:
                    confirmations[player] = oracles[player].prefer(
                        candidate, key=key
                    )
                except QueryRequired:
                    pending[player] = PendingQuery(
                        id=f"c{N}:{cell_index}:{player}",
                        player=player,
                        mesh=N,
                        division=candidate,
                        key=key,
                        admissible=_admissible_selections(candidate),
                        kind="confirm",
                        allocated=allocation[player],
                    )
            if pending:
                return DriveOutcome(
                    status="querying",
                    pending=pending,
                    report=None,
                    mesh=N,
                    cells_scanned=cells_scanned,
                )
            if all(
                confirmations[p] == allocation[p] for p in allocation
            ):
                humans = [
                    p
                    for p, model in oracles.items()
                    if isinstance(model, ScriptedOracle)
                ]
                delta = None
                flags = ["human-confirmed"] if humans else []
                if not humans:
                    delta = verifier.envy_report(
                        candidate, allocation, oracles
                    ).delta
                return DriveOutcome(
                    status="solved",
                    pending={},
                    report=SolveReport(
                        division=candidate,
                        allocation=allocation,
                        delta=delta,
                        mesh_used=N,
                        cells_found=cells_scanned,
                        disjoint=True,
                        converged=True,
                        flags=flags,
                    ),
                    mesh=N,
                    cells_scanned=cells_scanned,
                )
            # A player rejected the candidate; keep scanning.
    return DriveOutcome(
        status="failed",
        pending={},
        report=SolveReport(
            division=None,
            allocation={},
            delta=None,
            mesh_used=last_mesh,
            cells_found=cells_scanned,
            disjoint=False,
            converged=False,
            flags=["not-converged"],
        ),
        mesh=last_mesh,
        cells_scanned=cells_scanned,
    )


def replay_session(
    config: CakeConfig,
    schedule: Sequence[int],
    player_specs: Sequence[Mapping],
    answers: Mapping[int, Mapping[LatticeKey, PieceSelection]],
) -> SolveReport:
    """Re-run a recorded session fully offline: every human player is
    replaced by a scripted oracle holding the recorded answers.  A complete
    script reproduces the session's report exactly."""
    oracles: dict[int, PreferenceModel] = {}
    for i, spec in enumerate(player_specs):
        model = model_from_spec(spec)
        if isinstance(model, ScriptedOracle):
            model.answers.update(answers.get(i, {}))
        oracles[i] = model
    outcome = drive(config, schedule, oracles)
    if outcome.status == "querying":
        missing = {p: q.key for p, q in outcome.pending.items()}
        raise QueryRequired(
            next(iter(outcome.pending.values())).division,
            next(iter(missing.values())),
        )
    assert outcome.report is not None
    return outcome.report


def interactive_query_budget(
    config: CakeConfig, schedule: Sequence[int], human_players: Sequence[int]
) -> int:
    """Upper bound on queries: human-owned non-pure vertices across the
    schedule (pure vertices answer themselves)."""
    total = 0
    humans = set(human_players)
    for N in schedule:
        T = build(config, N)
        owners = assign_owners(T, 2)
        for vid in range(T.vertex_count):
            if owners[vid] in humans and not T.is_pure_vertex(vid):
                total += 1
    return total


# ---- sessions ----


def _key_to_jsonable(key: LatticeKey) -> list:
    den, rows = key
    return [den, [list(r) for r in rows]]


def _key_from_jsonable(data) -> LatticeKey:
    den, rows = data
    return (int(den), tuple(tuple(int(y) for y in row) for row in rows))


@dataclass
class Session:
    id: str
    config: CakeConfig
    schedule: list[int]
    player_specs: list[dict]
    tokens: dict[int, str]
    status: str = "configuring"
    answers: dict[int, dict[LatticeKey, PieceSelection]] = field(
        default_factory=dict
    )
    answered_queries: dict[str, tuple[int, ...]] = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)
    outcome: DriveOutcome | None = None
    events: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def human_players(self) -> list[int]:
        return [
            i
            for i, spec in enumerate(self.player_specs)
            if spec.get("kind") == "human"
        ]

    def oracles(self) -> dict[int, PreferenceModel]:
        out: dict[int, PreferenceModel] = {}
        for i, spec in enumerate(self.player_specs):
            model = model_from_spec(spec)
            if isinstance(model, ScriptedOracle):
                model.answers.update(self.answers.get(i, {}))
            out[i] = model
        return out

    def advance(self) -> None:
        outcome = drive(self.config, self.schedule, self.oracles())
        self.outcome = outcome
        previous = self.status
        self.status = {
            "querying": "querying",
            "solved": "solved",
            "failed": "failed",
        }[outcome.status]
        for q in outcome.pending.values():
            self._push("query", q.to_jsonable())
        self._push("progress", self.progress())
        if self.status in ("solved", "failed") and previous not in (
            "solved",
            "failed",
        ):
            assert outcome.report is not None
            self._push("result", outcome.report.to_jsonable())

    def _push(self, type_: str, payload: dict) -> None:
        self.events.append(
            {"v": PROTOCOL_VERSION, "type": type_, "seq": len(self.events), "payload": payload}
        )

    def progress(self) -> dict:
        return {
            "status": self.status,
            "mesh": self.outcome.mesh if self.outcome else None,
            "cells_scanned": self.outcome.cells_scanned if self.outcome else 0,
            "answered": {
                str(p): len(self.answers.get(p, {}))
                for p in range(len(self.player_specs))
            },
        }

    def pending_for(self, player: int) -> PendingQuery | None:
        if not self.outcome:
            return None
        return self.outcome.pending.get(player)

    def snapshot(self) -> dict:
        pending = {}
        if self.outcome:
            pending = {
                str(p): q.to_jsonable() for p, q in self.outcome.pending.items()
            }
        report = None
        if self.status in ("solved", "failed") and self.outcome and self.outcome.report:
            report = self.outcome.report.to_jsonable()
        return {
            "v": PROTOCOL_VERSION,
            "id": self.id,
            "status": self.status,
            "config": list(self.config.pieces_per_cake),
            "schedule": list(self.schedule),
            "players": [spec.get("kind") for spec in self.player_specs],
            "pending": pending,
            "progress": self.progress(),
            "history": list(self.history),
            "result": report,
        }

    def record_answer(self, player: int, key: LatticeKey, selection: PieceSelection) -> None:
        self.answers.setdefault(player, {})[key] = selection
        self.history.append(
            {
                "player": player,
                "division": division_of_key(key).to_jsonable(),
                "selection": list(selection.picks),
            }
        )


class SessionError(Exception):
    def __init__(self, status_code: int, detail: str):
        super().__init__(detail)
        self.status_code = status_code
        self.detail = detail


class SessionManager:
    """All live sessions plus an append-only journal for crash recovery.

    Event handling is serialized per session; the journal replays on
    restart to rebuild identical state.
    """

    def __init__(self, journal_path: str | Path | None = None):
        self.sessions: dict[str, Session] = {}
        self.journal_path = Path(journal_path) if journal_path else None
        self._journal_lock = threading.Lock()
        if self.journal_path and self.journal_path.exists():
            self._replay_journal()

    def _journal(self, record: dict) -> None:
        if not self.journal_path:
            return
        with self._journal_lock:
            with self.journal_path.open("a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _replay_journal(self) -> None:
        assert self.journal_path is not None
        with self.journal_path.open() as fh:
            for line in fh:
                record = json.loads(line)
                if record["event"] == "create":
                    session = Session(
                        id=record["id"],
                        config=CakeConfig(tuple(record["config"])),
                        schedule=[int(n) for n in record["schedule"]],
                        player_specs=list(record["players"]),
                        tokens={
                            int(p): t for p, t in record["tokens"].items()
                        },
                    )
                    self.sessions[session.id] = session
                elif record["event"] == "answer":
                    session = self.sessions[record["id"]]
                    player = int(record["player"])
                    key = _key_from_jsonable(record["key"])
                    session.record_answer(
                        player, key, PieceSelection(tuple(record["selection"]))
                    )
        for session in self.sessions.values():
            session.advance()

    def create(
        self,
        config: CakeConfig,
        player_specs: Sequence[Mapping],
        schedule: Sequence[int],
    ) -> Session:
        if len(player_specs) != 2:
            raise SessionError(400, "exactly two players are supported")
        if list(schedule) != sorted(set(schedule)) or not schedule:
            raise SessionError(400, "schedule must be strictly increasing")
        specs = [dict(s) for s in player_specs]
        humans = [i for i, s in enumerate(specs) if s.get("kind") == "human"]
        if humans:
            budget = interactive_query_budget(config, schedule, humans)
            if budget > INTERACTIVE_QUERY_BUDGET:
                raise SessionError(
                    400,
                    f"interactive query budget exceeded: {budget} potential "
                    f"queries > {INTERACTIVE_QUERY_BUDGET}",
                )
        session = Session(
            id=uuid.uuid4().hex,
            config=config,
            schedule=[int(n) for n in schedule],
            player_specs=specs,
            tokens={i: uuid.uuid4().hex for i in range(len(specs))},
        )
        self.sessions[session.id] = session
        self._journal(
            {
                "event": "create",
                "id": session.id,
                "config": list(config.pieces_per_cake),
                "schedule": list(schedule),
                "players": specs,
                "tokens": {str(p): t for p, t in session.tokens.items()},
            }
        )
        with session.lock:
            session.advance()
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionError(404, f"unknown session {session_id}")
        return session

    def submit_answer(
        self,
        session_id: str,
        player: int,
        token: str | None,
        query_id: str,
        picks: Sequence[int],
    ) -> Session:
        session = self.get(session_id)
        with session.lock:
            if player not in range(len(session.player_specs)):
                raise SessionError(400, f"unknown player {player}")
            if token is not None and session.tokens.get(player) != token:
                raise SessionError(403, "bad player token")
            selection = make_selection(session.config, picks)
            query = session.pending_for(player)
            if query is None or query.id != query_id:
                # Re-answering a settled query identically is acknowledged.
                settled = session.answered_queries.get(f"{player}:{query_id}")
                if settled == selection.picks:
                    return session
                raise SessionError(409, f"no pending query {query_id}")
            try:
                ScriptedOracle.validate_answer(query.division, selection)
            except ValueError as exc:
                raise SessionError(422, str(exc)) from exc
            session.record_answer(player, query.key, selection)
            session.answered_queries[f"{player}:{query_id}"] = selection.picks
            self._journal(
                {
                    "event": "answer",
                    "id": session.id,
                    "player": player,
                    "key": _key_to_jsonable(query.key),
                    "selection": list(selection.picks),
                }
            )
            session.advance()
        return session


# ---- HTTP / WebSocket wiring ----


def create_app(
    journal_path: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    import asyncio

    manager = SessionManager(journal_path=journal_path)
    app = FastAPI(title="multicake sessions")
    app.state.manager = manager
    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount(
            "/ui", StaticFiles(directory=static_dir, html=True), name="ui"
        )

    @app.exception_handler(SessionError)
    async def _session_error(request, exc: SessionError):
        return JSONResponse(
            status_code=exc.status_code, content={"detail": exc.detail}
        )

    @app.post("/sessions")
    async def create_session(payload: dict):
        config = CakeConfig(tuple(int(k) for k in payload["config"]))
        session = manager.create(
            config,
            payload["players"],
            payload.get("schedule", [2, 4]),
        )
        return {
            "v": PROTOCOL_VERSION,
            "id": session.id,
            "tokens": {str(p): t for p, t in session.tokens.items()},
            "state": session.snapshot(),
        }

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return manager.get(session_id).snapshot()

    @app.get("/sessions/{session_id}/query")
    async def get_query(session_id: str, player: int):
        session = manager.get(session_id)
        query = session.pending_for(player)
        return {
            "v": PROTOCOL_VERSION,
            "query": query.to_jsonable() if query else None,
        }

    @app.post("/sessions/{session_id}/answer")
    async def post_answer(session_id: str, payload: dict):
        session = manager.submit_answer(
            session_id,
            int(payload["player"]),
            payload.get("token"),
            str(payload["query_id"]),
            payload["selection"],
        )
        return {"v": PROTOCOL_VERSION, "ok": True, "state": session.snapshot()}

    @app.get("/sessions/{session_id}/result")
    async def get_result(session_id: str):
        session = manager.get(session_id)
        report = None
        if session.outcome and session.outcome.report:
            report = session.outcome.report.to_jsonable()
        return {
            "v": PROTOCOL_VERSION,
            "status": session.status,
            "report": report,
        }

    @app.websocket("/sessions/{session_id}/events")
    async def events(websocket: WebSocket, session_id: str):
        await websocket.accept()
        try:
            session = manager.get(session_id)
        except SessionError:
            await websocket.close(code=4404)
            return
        cursor = 0
        try:
            while True:
                events_now = session.events
                while cursor < len(events_now):
                    await websocket.send_json(events_now[cursor])
                    cursor += 1
                if session.status in ("solved", "failed") and cursor >= len(
                    session.events
                ):
                    await websocket.send_json(
                        {"v": PROTOCOL_VERSION, "type": "end", "payload": {}}
                    )
                    break
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return
        await websocket.close()

    return app
