// Reconnecting WebSocket with exponential backoff. On every (re)open the
// resync callback runs first (GET /state snapshot) and only then do live
// frames flow, so ordering survives reconnects.

import { parseUpdate, type Update } from "./protocol.js";

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface WsHandlers {
  onUpdate(update: Update): void;
  onOpen(): Promise<void> | void; // resync hook; runs before live frames apply
  onDisconnect(): void;
}

export class ReconnectingSocket {
  private socket: SocketLike | null = null;
  private closed = false;
  private attempts = 0;
  private pendingFrames: string[] = [];
  private syncing = false;

  constructor(
    private readonly url: string,
    private readonly handlers: WsHandlers,
    private readonly factory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike,
    private readonly backoffBaseMs = 1000,
    private readonly backoffCapMs = 30_000,
  ) {}

  connect(): void {
    if (this.closed) {
      return;
    }
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      void this.resync();
    };
    socket.onmessage = (event) => {
      const raw = String(event.data);
      if (this.syncing) {
        this.pendingFrames.push(raw);
        return;
      }
      this.dispatch(raw);
    };
    socket.onclose = () => this.scheduleReconnect();
    socket.onerror = () => {
      // close follows; reconnect handled there
    };
  }

  private async resync(): Promise<void> {
    this.syncing = true;
    this.pendingFrames = [];
    try {
      await this.handlers.onOpen();
    } finally {
      this.syncing = false;
      const buffered = this.pendingFrames;
      this.pendingFrames = [];
      for (const raw of buffered) {
        this.dispatch(raw);
      }
    }
  }

  private dispatch(raw: string): void {
    const update = parseUpdate(raw);
    if (update) {
      this.handlers.onUpdate(update);
    }
  }

  private scheduleReconnect(): void {
    this.socket = null;
    if (this.closed) {
      return;
    }
    this.handlers.onDisconnect();
    const delay = Math.min(this.backoffBaseMs * 2 ** this.attempts, this.backoffCapMs);
    this.attempts += 1;
    setTimeout(() => this.connect(), delay);
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
