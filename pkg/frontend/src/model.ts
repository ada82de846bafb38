/**
 * Session view model: a DOM-free state machine driving the query/answer
 * flow.  Every state change is confirmed by the server (no optimistic
 * updates); the draft selection mirrors the server's admissibility rule so
 * the submit control only enables on answers the server would accept.
 */

import { ApiClient } from "./client.js";
import { Query, Selection, Snapshot } from "./types.js";

export type DraftState = (number | null)[];

export function emptyDraft(config: number[]): DraftState {
  return config.map(() => null);
}

/** Mirror of the server's rule: one pick per cake, every picked piece has
 * positive length at the queried division. */
export function draftIsSubmittable(query: Query, draft: DraftState): boolean {
  if (draft.length !== query.division.length) return false;
  return draft.every(
    (pick, cake) =>
      pick !== null &&
      pick >= 0 &&
      pick < query.division[cake].length &&
      query.division[cake][pick] > 0,
  );
}

export interface ViewState {
  status: Snapshot["status"] | "loading";
  snapshot: Snapshot | null;
  query: Query | null;
  draft: DraftState;
  error: string | null;
}

export class SessionViewModel {
  state: ViewState = {
    status: "loading",
    snapshot: null,
    query: null,
    draft: [],
    error: null,
  };
  private listeners: Array<(state: ViewState) => void> = [];

  constructor(
    private client: ApiClient,
    private sessionId: string,
    private player: number,
    private token: string,
  ) {}

  onChange(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  applySnapshot(snapshot: Snapshot): void {
    const query = snapshot.pending[String(this.player)] ?? null;
    const sameQuery = this.state.query?.id === query?.id;
    this.state = {
      status: snapshot.status,
      snapshot,
      query,
      draft:
        query && sameQuery ? this.state.draft : emptyDraft(snapshot.config),
      error: sameQuery ? this.state.error : null,
    };
    this.emit();
  }

  async refresh(): Promise<void> {
    this.applySnapshot(await this.client.getState(this.sessionId));
  }

  pick(cake: number, piece: number): void {
    const query = this.state.query;
    if (!query) return;
    if (query.division[cake][piece] <= 0) return; // zero pieces unclickable
    const draft = [...this.state.draft];
    draft[cake] = piece;
    this.state = { ...this.state, draft, error: null };
    this.emit();
  }

  canSubmit(): boolean {
    return (
      this.state.query !== null &&
      draftIsSubmittable(this.state.query, this.state.draft)
    );
  }

  /** Accept the allocated selection of a confirmation query as the draft. */
  acceptAllocated(): void {
    const query = this.state.query;
    if (!query || query.kind !== "confirm" || !query.allocated) return;
    this.state = { ...this.state, draft: [...query.allocated], error: null };
    this.emit();
  }

  async submit(): Promise<boolean> {
    const query = this.state.query;
    if (!query || !this.canSubmit()) return false;
    try {
      const snapshot = await this.client.postAnswer(
        this.sessionId,
        this.player,
        this.token,
        query.id,
        this.state.draft as Selection,
      );
      this.applySnapshot(snapshot);
      return true;
    } catch (err) {
      this.state = { ...this.state, error: String(err) };
      this.emit();
      return false;
    }
  }
}
