/**
 * Browser entry: wires the view model to the DOM.  Hot-seat mode shows one
 * tab per player in a single page; two-browser mode joins an existing
 * session with a player number and token.  Refresh recovers from the
 * server snapshot; nothing is persisted client-side except the token
 * fields the user can copy.
 */

import { ApiClient } from "./client.js";
import { EventStream } from "./events.js";
import {
  renderDivision,
  renderResult,
  replayStep,
  selectionName,
} from "./layout.js";
import { SessionViewModel, ViewState } from "./model.js";
import { BarLayout } from "./layout.js";
import { Query, Snapshot } from "./types.js";

const baseUrl = window.location.origin;
const client = new ApiClient(baseUrl);

interface Seat {
  player: number;
  model: SessionViewModel;
  panel: HTMLElement;
}

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function paintBars(
  container: HTMLElement,
  query: Query,
  state: ViewState,
  onPick: (cake: number, piece: number) => void,
): void {
  container.textContent = "";
  const bars = renderDivision(query.division, state.draft);
  for (const bar of bars) {
    const row = el("div", "bar");
    row.appendChild(el("span", "bar-label", `cake ${bar.cake + 1}`));
    const track = el("div", "track");
    for (const seg of bar.segments) {
      const cls = [
        "segment",
        seg.selectable ? "selectable" : "empty",
        seg.selected ? "selected" : "",
      ].join(" ");
      const node = el("div", cls, seg.widthPct > 6 ? seg.name : "");
      node.style.width = `${seg.widthPct}%`;
      if (seg.selectable) {
        node.addEventListener("click", () => onPick(seg.cake, seg.piece));
      }
      track.appendChild(node);
    }
    row.appendChild(track);
    container.appendChild(row);
  }
}

function paintHighlightBars(container: HTMLElement, bars: BarLayout[]): void {
  for (const bar of bars) {
    const row = el("div", "bar");
    row.appendChild(el("span", "bar-label", `cake ${bar.cake + 1}`));
    const track = el("div", "track");
    for (const seg of bar.segments) {
      const cls =
        "segment " +
        (seg.highlights.length === 1
          ? `owner-${seg.highlights[0]}`
          : seg.highlights.length > 1
            ? "overlap"
            : "idle");
      const node = el("div", cls, seg.widthPct > 6 ? seg.name : "");
      node.style.width = `${seg.widthPct}%`;
      track.appendChild(node);
    }
    row.appendChild(track);
    container.appendChild(row);
  }
}

function paintResult(container: HTMLElement, snapshot: Snapshot): void {
  container.textContent = "";
  if (!snapshot.result) return;
  const layout = renderResult(snapshot.result);
  if (layout.banner) {
    container.appendChild(el("div", "banner", layout.banner));
    if (!layout.bars.length) return;
  }
  const title = snapshot.result.disjoint
    ? "solved: disjoint selections"
    : "finished without disjoint selections";
  container.appendChild(el("h3", "", title));
  for (const [player, selection] of Object.entries(
    snapshot.result.allocation,
  )) {
    container.appendChild(
      el("div", "", `player ${Number(player) + 1} takes ${selectionName(selection)}`),
    );
  }
  paintHighlightBars(container, layout.bars);
  if (snapshot.history.length) {
    let index = 0;
    const replayBox = el("div", "replay");
    const caption = el("div", "progress");
    const barsBox = el("div", "");
    const paint = () => {
      const step = replayStep(snapshot.history, index);
      if (!step) return;
      caption.textContent = step.caption;
      barsBox.textContent = "";
      paintHighlightBars(barsBox, step.bars);
    };
    const prev = el("button", "", "previous answer") as HTMLButtonElement;
    const next = el("button", "", "next answer") as HTMLButtonElement;
    prev.addEventListener("click", () => {
      index = Math.max(0, index - 1);
      paint();
    });
    next.addEventListener("click", () => {
      index = Math.min(snapshot.history.length - 1, index + 1);
      paint();
    });
    replayBox.appendChild(el("h4", "", "how we got here"));
    replayBox.appendChild(prev);
    replayBox.appendChild(next);
    replayBox.appendChild(caption);
    replayBox.appendChild(barsBox);
    paint();
    container.appendChild(replayBox);
  }
}

function paintSeat(seat: Seat): void {
  const { model, panel } = seat;
  const state = model.state;
  panel.textContent = "";
  panel.appendChild(el("h2", "", `player ${seat.player + 1}`));
  if (state.snapshot) {
    const progress = state.snapshot.progress;
    panel.appendChild(
      el(
        "div",
        "progress",
        `status ${state.status}; mesh ${progress.mesh ?? "-"}; answered ` +
          Object.entries(progress.answered)
            .map(([p, n]) => `p${Number(p) + 1}:${n}`)
            .join(" "),
      ),
    );
  }
  if (state.error) panel.appendChild(el("div", "error", state.error));
  if (state.status === "solved" || state.status === "failed") {
    const resultBox = el("div", "result");
    panel.appendChild(resultBox);
    if (state.snapshot) paintResult(resultBox, state.snapshot);
    return;
  }
  const query = state.query;
  if (!query) {
    panel.appendChild(el("div", "", "waiting for the other player..."));
    return;
  }
  panel.appendChild(
    el(
      "div",
      "prompt",
      query.kind === "confirm"
        ? `final check: is ${selectionName(query.allocated ?? [])} your ` +
          `favorite selection in this division?`
        : "which piece selection do you prefer in this division?",
    ),
  );
  const barsBox = el("div", "bars");
  panel.appendChild(barsBox);
  paintBars(barsBox, query, state, (cake, piece) => {
    model.pick(cake, piece);
    paintSeat(seat);
  });
  if (query.kind === "confirm" && query.allocated) {
    const accept = el("button", "", "yes, that is my favorite") as HTMLButtonElement;
    accept.addEventListener("click", () => {
      model.acceptAllocated();
      void model.submit();
    });
    panel.appendChild(accept);
  }
  const submit = el("button", "", "submit answer") as HTMLButtonElement;
  submit.disabled = !model.canSubmit();
  submit.addEventListener("click", () => {
    void model.submit();
  });
  panel.appendChild(submit);
}

async function startHotSeat(): Promise<void> {
  const created = await client.createSession({
    config: [2, 3],
    players: [{ kind: "human" }, { kind: "human" }],
    schedule: [2, 4],
  });
  const root = document.getElementById("app")!;
  root.textContent = "";
  const seats: Seat[] = [0, 1].map((player) => {
    const panel = el("section", "seat");
    root.appendChild(panel);
    const model = new SessionViewModel(
      client,
      created.id,
      player,
      created.tokens[String(player)],
    );
    const seat = { player, model, panel };
    model.onChange(() => paintSeat(seat));
    return seat;
  });
  const stream = new EventStream(baseUrl, created.id, () => {
    for (const seat of seats) void seat.model.refresh();
  });
  stream.start();
  for (const seat of seats) await seat.model.refresh();
}

/** Two-browser mode: join an existing session from the URL, e.g.
 * ?session=<id>&player=1&token=<token>. */
async function joinFromUrl(): Promise<boolean> {
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session");
  const player = params.get("player");
  const token = params.get("token");
  if (!sessionId || player === null || !token) return false;
  const root = document.getElementById("app")!;
  root.textContent = "";
  const panel = el("section", "seat");
  root.appendChild(panel);
  const model = new SessionViewModel(client, sessionId, Number(player), token);
  const seat = { player: Number(player), model, panel };
  model.onChange(() => paintSeat(seat));
  const stream = new EventStream(baseUrl, sessionId, () => {
    void model.refresh();
  });
  stream.start();
  await model.refresh();
  return true;
}

const startButton = document.getElementById("start");
if (startButton) {
  startButton.addEventListener("click", () => {
    void startHotSeat();
  });
}
void joinFromUrl();
