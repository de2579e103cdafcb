// Pure view-model for the viewer overlay. No DOM, no network: feed it
// updates and connection events, read its state. Rendering is elsewhere.

import {
  maskOnFor,
} from "./scenes.js";
import type { EngineState, StatsUpdate, Update, WindowVerdict } from "./protocol.js";

export const CHAT_BUFFER_LIMIT = 200;

export type ConnectionState = "connecting" | "live" | "dropped";

export interface ChatItem {
  id: string;
  author: string;
  body: string;
  negative: boolean;
  own: boolean;
}

export interface PendingSend {
  localId: string;
  author: string;
  body: string;
  status: "queued" | "posting" | "failed";
  serverId?: string;
  error?: string;
}

export class OverlayModel {
  plot: string | null = "stable";
  maskOn = false;
  heartQueue = 0;
  chat: ChatItem[] = [];
  notices: string[] = [];
  mode: "with_story" | "without_story" = "with_story";
  stats: WindowVerdict | null = null;
  viewers = 0;
  connection: ConnectionState = "connecting";
  pendingSends: PendingSend[] = [];
  lastSeq = 0;
  private localCounter = 0;
  private ownIds = new Set<string>();

  get narrativeVisible(): boolean {
    return this.mode === "with_story";
  }

  apply(update: Update): void {
    if (update.seq <= this.lastSeq) {
      return; // stale frame after a resync
    }
    this.lastSeq = update.seq;
    switch (update.type) {
      case "chat": {
        this.reconcileSend(update.id);
        this.pushChat({
          id: update.id,
          author: update.author,
          body: update.body,
          negative: update.negative,
          own: this.ownIds.has(update.id),
        });
        break;
      }
      case "state": {
        this.plot = update.plot;
        this.maskOn = maskOnFor(update.plot);
        if (update.event === "heart_burst") {
          this.heartQueue += 1;
        }
        break;
      }
      case "notice": {
        this.notices.push(update.text);
        if (this.notices.length > 20) {
          this.notices.shift();
        }
        break;
      }
      case "stats": {
        this.applyStats(update);
        break;
      }
    }
  }

  private applyStats(update: StatsUpdate): void {
    this.stats = update.window;
    this.mode = update.mode;
    this.viewers = update.viewers;
    if (this.mode === "without_story") {
      this.plot = null;
      this.maskOn = false;
    } else if (this.plot === null) {
      this.plot = "stable";
    }
  }

  private pushChat(item: ChatItem): void {
    this.chat.push(item);
    if (this.chat.length > CHAT_BUFFER_LIMIT) {
      this.chat.splice(0, this.chat.length - CHAT_BUFFER_LIMIT);
    }
  }

  consumeHearts(max = 5): number {
    const burst = Math.min(this.heartQueue, max);
    this.heartQueue -= burst;
    return burst;
  }

  // ----- connection lifecycle -------------------------------------------

  connectionChanged(state: ConnectionState): void {
    this.connection = state;
  }

  resyncFromState(state: EngineState): void {
    // Snapshot first, then the live stream: seq restarts per connection.
    this.lastSeq = 0;
    this.mode = state.mode;
    this.viewers = state.viewers;
    this.stats = state.window;
    this.plot = state.mode === "with_story" ? state.plot ?? "stable" : null;
    this.maskOn = maskOnFor(this.plot);
    this.connection = "live";
  }

  // ----- composer / optimistic echo -------------------------------------

  queueSend(author: string, body: string): PendingSend {
    this.localCounter += 1;
    const pending: PendingSend = {
      localId: `local-${this.localCounter}`,
      author,
      body,
      status: this.connection === "live" ? "posting" : "queued",
    };
    this.pendingSends.push(pending);
    return pending;
  }

  sendAcknowledged(localId: string, serverId: string): void {
    const pending = this.pendingSends.find((p) => p.localId === localId);
    if (pending) {
      pending.serverId = serverId;
      this.ownIds.add(serverId);
      // If the broadcast copy raced ahead of the ack, drop the pending now.
      const raced = this.chat.find((item) => item.id === serverId);
      if (raced) {
        raced.own = true;
        this.removePending(localId);
      }
    }
  }

  sendFailed(localId: string, error: string): void {
    const pending = this.pendingSends.find((p) => p.localId === localId);
    if (pending) {
      pending.status = "failed";
      pending.error = error;
    }
  }

  private reconcileSend(serverId: string): void {
    const index = this.pendingSends.findIndex((p) => p.serverId === serverId);
    if (index >= 0) {
      this.pendingSends.splice(index, 1);
    }
  }

  private removePending(localId: string): void {
    const index = this.pendingSends.findIndex((p) => p.localId === localId);
    if (index >= 0) {
      this.pendingSends.splice(index, 1);
    }
  }

  takeQueuedSends(): PendingSend[] {
    const queued = this.pendingSends.filter((p) => p.status === "queued");
    for (const pending of queued) {
      pending.status = "posting";
    }
    return queued;
  }
}
