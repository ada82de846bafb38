/**
 * Wire types mirroring the session service protocol.  The client never
 * constructs domain values of its own: divisions, selections and reports
 * are rendered exactly as received.
 */

/** Piece lengths, one row per cake; each row sums to 1. */
export type Division = number[][];

/** One chosen piece index per cake. */
export type Selection = number[];

/** Exact rational identity of a division: [denominator, unit matrix]. */
export type DivisionKey = [number, number[][]];

export interface Query {
  v: number;
  id: string;
  player: number;
  mesh: number;
  division: Division;
  key: DivisionKey;
  admissible: Selection[];
  kind: "label" | "confirm";
  allocated: Selection | null;
}

export interface SolveReport {
  v: number;
  division: Division | null;
  allocation: Record<string, Selection>;
  delta: number | null;
  mesh_used: number;
  cells_found: number;
  disjoint: boolean;
  converged: boolean;
  flags: string[];
}

export interface Progress {
  status: string;
  mesh: number | null;
  cells_scanned: number;
  answered: Record<string, number>;
}

export interface AnsweredQuery {
  player: number;
  division: Division;
  selection: Selection;
}

export interface Snapshot {
  v: number;
  id: string;
  status: "configuring" | "querying" | "solved" | "failed";
  config: number[];
  schedule: number[];
  players: string[];
  pending: Record<string, Query>;
  progress: Progress;
  history: AnsweredQuery[];
  result: SolveReport | null;
}

export interface CreatedSession {
  v: number;
  id: string;
  tokens: Record<string, string>;
  state: Snapshot;
}

export interface SessionEvent {
  v: number;
  type: "query" | "progress" | "result" | "end";
  seq?: number;
  payload: Record<string, unknown>;
}

export const PIECE_NAMES = "abcdefghijklmnopqrstuvwxyz";
