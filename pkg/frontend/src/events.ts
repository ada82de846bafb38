/**
 * Server event stream: WebSocket where available, polling otherwise.
 * Events arrive in order; the consumer re-reads the authoritative snapshot
 * on every change notification.
 */

import { SessionEvent } from "./types.js";

export interface EventStreamOptions {
  pollIntervalMs?: number;
  webSocketFactory?: (url: string) => WebSocket;
}

export class EventStream {
  private socket: WebSocket | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private baseUrl: string,
    private sessionId: string,
    private onEvent: (event: SessionEvent) => void,
    private options: EventStreamOptions = {},
  ) {}

  start(): void {
    const factory =
      this.options.webSocketFactory ??
      (typeof WebSocket !== "undefined"
        ? (url: string) => new WebSocket(url)
        : null);
    if (factory) {
      const wsUrl =
        this.baseUrl.replace(/^http/, "ws") +
        `/sessions/${this.sessionId}/events`;
      try {
        this.socket = factory(wsUrl);
        this.socket.onmessage = (message: MessageEvent) => {
          const event = JSON.parse(String(message.data)) as SessionEvent;
          this.onEvent(event);
        };
        this.socket.onclose = () => {
          this.socket = null;
        };
        return;
      } catch {
        this.socket = null; // fall through to polling
      }
    }
    const interval = this.options.pollIntervalMs ?? 300;
    this.timer = setInterval(() => {
      void this.poll();
    }, interval);
  }

  private async poll(): Promise<void> {
    const response = await fetch(`${this.baseUrl}/sessions/${this.sessionId}`);
    if (!response.ok) return;
    const snapshot = (await response.json()) as { status: string };
    this.onEvent({ v: 1, type: "progress", payload: snapshot });
    if (snapshot.status === "solved" || snapshot.status === "failed") {
      this.stop();
      this.onEvent({ v: 1, type: "end", payload: {} });
    }
  }

  stop(): void {
    if (this.socket) {
      this.socket.close();
      this.socket = null;
    }
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
