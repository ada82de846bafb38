import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/client.js";
import {
  SessionViewModel,
  draftIsSubmittable,
  emptyDraft,
} from "../src/model.js";
import { Query, Snapshot } from "../src/types.js";

const query: Query = {
  v: 1,
  id: "v2:4",
  player: 0,
  mesh: 2,
  division: [
    [0.5, 0.5],
    [0.5, 0.0, 0.5],
  ],
  key: [2, [
    [1, 1],
    [1, 0, 1],
  ]],
  admissible: [
    [0, 0],
    [0, 2],
    [1, 0],
    [1, 2],
  ],
  kind: "label",
  allocated: null,
};

function snapshotWith(pending: Record<string, Query>): Snapshot {
  return {
    v: 1,
    id: "s1",
    status: "querying",
    config: [2, 3],
    schedule: [2, 4],
    players: ["human", "human"],
    pending,
    progress: { status: "querying", mesh: 2, cells_scanned: 0, answered: {} },
    history: [],
    result: null,
  };
}

describe("draft admissibility mirror", () => {
  it("requires one pick per cake", () => {
    expect(draftIsSubmittable(query, emptyDraft([2, 3]))).toBe(false);
    expect(draftIsSubmittable(query, [0, null])).toBe(false);
    expect(draftIsSubmittable(query, [0, 2])).toBe(true);
  });

  it("rejects zero-length picks exactly like the server", () => {
    expect(draftIsSubmittable(query, [0, 1])).toBe(false);
  });
});

function fakeFetch(routes: Record<string, unknown>): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const handler = routes[`${method} ${new URL(url).pathname}`];
    if (handler === undefined) {
      return new Response(JSON.stringify({ detail: "not found" }), {
        status: 404,
      });
    }
    const body =
      typeof handler === "function"
        ? (handler as (init?: RequestInit) => unknown)(init)
        : handler;
    if (body instanceof Response) return body;
    return new Response(JSON.stringify(body), { status: 200 });
  }) as typeof fetch;
}

describe("SessionViewModel", () => {
  it("tracks the pending query and enables submit only on valid drafts", async () => {
    const snapshot = snapshotWith({ "0": query });
    const client = new ApiClient(
      "http://test",
      fakeFetch({ "GET /sessions/s1": snapshot }),
    );
    const model = new SessionViewModel(client, "s1", 0, "tok");
    await model.refresh();
    expect(model.state.query?.id).toBe("v2:4");
    expect(model.canSubmit()).toBe(false);
    model.pick(0, 0);
    model.pick(1, 1); // zero-length: ignored
    expect(model.canSubmit()).toBe(false);
    model.pick(1, 2);
    expect(model.canSubmit()).toBe(true);
  });

  it("submits the draft and applies the returned snapshot", async () => {
    const after = snapshotWith({});
    after.status = "solved";
    let posted: unknown = null;
    const client = new ApiClient(
      "http://test",
      fakeFetch({
        "GET /sessions/s1": snapshotWith({ "0": query }),
        "POST /sessions/s1/answer": (init?: RequestInit) => {
          posted = JSON.parse(String(init?.body));
          return { v: 1, ok: true, state: after };
        },
      }),
    );
    const model = new SessionViewModel(client, "s1", 0, "tok");
    await model.refresh();
    model.pick(0, 1);
    model.pick(1, 0);
    expect(await model.submit()).toBe(true);
    expect(posted).toMatchObject({
      player: 0,
      token: "tok",
      query_id: "v2:4",
      selection: [1, 0],
    });
    expect(model.state.status).toBe("solved");
  });

  it("surfaces server rejections verbatim", async () => {
    const client = new ApiClient(
      "http://test",
      fakeFetch({
        "GET /sessions/s1": snapshotWith({ "0": query }),
        "POST /sessions/s1/answer": new Response(
          JSON.stringify({ detail: "cake 1: piece 1 has zero length here" }),
          { status: 422 },
        ),
      }),
    );
    const model = new SessionViewModel(client, "s1", 0, "tok");
    await model.refresh();
    model.pick(0, 0);
    model.pick(1, 0);
    expect(await model.submit()).toBe(false);
    expect(model.state.error).toContain("zero length");
  });

  it("accepts the allocated selection on confirmation queries", async () => {
    const confirm: Query = {
      ...query,
      id: "c2:0:0",
      kind: "confirm",
      allocated: [1, 2],
    };
    const client = new ApiClient(
      "http://test",
      fakeFetch({ "GET /sessions/s1": snapshotWith({ "0": confirm }) }),
    );
    const model = new SessionViewModel(client, "s1", 0, "tok");
    await model.refresh();
    model.acceptAllocated();
    expect(model.state.draft).toEqual([1, 2]);
    expect(model.canSubmit()).toBe(true);
  });

  it("never invents domain values: snapshot data passes through unchanged", async () => {
    const snapshot = snapshotWith({ "0": query });
    const client = new ApiClient(
      "http://test",
      fakeFetch({ "GET /sessions/s1": snapshot }),
    );
    const model = new SessionViewModel(client, "s1", 0, "tok");
    await model.refresh();
    expect(model.state.snapshot).toEqual(snapshot);
    expect(model.state.query?.division).toEqual(query.division);
  });
});
