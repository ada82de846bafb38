/**
 * Pure layout computations for cake bars and allocation views.  These take
 * service payloads and return plain data the DOM layer paints; widths are
 * percentages so segment sizes stay proportional to piece lengths.
 */

import {
  AnsweredQuery,
  Division,
  Selection,
  SolveReport,
  PIECE_NAMES,
} from "./types.js";

export interface Segment {
  cake: number;
  piece: number;
  name: string;
  /** Percentage of the bar width; zero-length pieces get width 0. */
  widthPct: number;
  /** Zero-length pieces are painted but never clickable. */
  selectable: boolean;
  selected: boolean;
  /** Players whose allocated selection includes this piece. */
  highlights: number[];
}

export interface BarLayout {
  cake: number;
  segments: Segment[];
}

export function renderDivision(
  division: Division,
  draft: (number | null)[] | null = null,
  highlights: Record<string, Selection> | null = null,
): BarLayout[] {
  return division.map((row, cake) => {
    const segments = row.map((length, piece) => {
      const owners: number[] = [];
      if (highlights) {
        for (const [player, selection] of Object.entries(highlights)) {
          if (selection[cake] === piece) owners.push(Number(player));
        }
      }
      return {
        cake,
        piece,
        name: PIECE_NAMES[piece],
        widthPct: length * 100,
        selectable: length > 0,
        selected: draft !== null && draft[cake] === piece,
        highlights: owners.sort((a, b) => a - b),
      };
    });
    return { cake, segments };
  });
}

export function barWidthsSumToFull(bar: BarLayout, tol = 1e-9): boolean {
  const total = bar.segments.reduce((acc, s) => acc + s.widthPct, 0);
  return Math.abs(total - 100) <= tol * 100;
}

export interface ResultLayout {
  bars: BarLayout[];
  disjoint: boolean;
  /** Segments claimed by more than one player (must be empty when the
   * allocation is disjoint). */
  overlaps: { cake: number; piece: number }[];
  banner: string | null;
}

export function renderResult(report: SolveReport): ResultLayout {
  if (report.division === null) {
    return {
      bars: [],
      disjoint: false,
      overlaps: [],
      banner: `no division found (${report.flags.join(", ")})`,
    };
  }
  const bars = renderDivision(report.division, null, report.allocation);
  const overlaps: { cake: number; piece: number }[] = [];
  for (const bar of bars) {
    for (const seg of bar.segments) {
      if (seg.highlights.length > 1) {
        overlaps.push({ cake: seg.cake, piece: seg.piece });
      }
    }
  }
  const banner = report.converged
    ? null
    : `search did not converge (${report.flags.join(", ")})`;
  return { bars, disjoint: report.disjoint, overlaps, banner };
}

export function selectionName(selection: Selection): string {
  return selection.map((p) => PIECE_NAMES[p]).join("");
}

export interface ReplayStep {
  index: number;
  total: number;
  player: number;
  caption: string;
  bars: BarLayout[];
}

/** Step-through of a finished session's answered queries: the division
 * shown at step i with the answering player's picks highlighted. */
export function replayStep(
  history: AnsweredQuery[],
  index: number,
): ReplayStep | null {
  if (index < 0 || index >= history.length) return null;
  const entry = history[index];
  const bars = renderDivision(entry.division, null, {
    [String(entry.player)]: entry.selection,
  });
  return {
    index,
    total: history.length,
    player: entry.player,
    caption:
      `step ${index + 1}/${history.length}: player ${entry.player + 1} ` +
      `chose ${selectionName(entry.selection)}`,
    bars,
  };
}
