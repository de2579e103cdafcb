import { describe, expect, it } from "vitest";

import { CHAT_BUFFER_LIMIT, OverlayModel } from "../src/overlayModel.js";
import type { ChatUpdate, StateUpdate, StatsUpdate, Update } from "../src/protocol.js";

let seqCounter = 0;

function chat(id: string, body = "hi", negative = false): ChatUpdate {
  seqCounter += 1;
  return { type: "chat", seq: seqCounter, t: seqCounter, id, author: "a", body, negative };
}

function state(plot: string, event = "state_changed"): StateUpdate {
  seqCounter += 1;
  return { type: "state", seq: seqCounter, t: seqCounter, plot, event };
}

function stats(mode: "with_story" | "without_story", viewers = 10_000): StatsUpdate {
  seqCounter += 1;
  return { type: "stats", seq: seqCounter, t: seqCounter, window: null, mode, viewers };
}

describe("OverlayModel", () => {
  it("bounds the chat buffer at 200", () => {
    const model = new OverlayModel();
    for (let n = 0; n < 250; n += 1) {
      model.apply(chat(`m-${n}`));
    }
    expect(model.chat).toHaveLength(CHAT_BUFFER_LIMIT);
    expect(model.chat[0].id).toBe("m-50");
    expect(model.chat.at(-1)!.id).toBe("m-249");
  });

  it("mask tracks ghost states exactly across a full arc", () => {
    const model = new OverlayModel();
    const maskByState: Array<[string, boolean]> = [];
    for (const plot of [
      "darkening",
      "ghost_present",
      "hearts_battle",
      "ghost_expelled",
      "stable",
    ]) {
      model.apply(state(plot));
      maskByState.push([plot, model.maskOn]);
    }
    expect(maskByState).toEqual([
      ["darkening", false],
      ["ghost_present", true],
      ["hearts_battle", true],
      ["ghost_expelled", false],
      ["stable", false],
    ]);
  });

  it("mask toggles exactly on red mask events", () => {
    const model = new OverlayModel();
    const toggles: string[] = [];
    let previous = model.maskOn;
    const frames: Update[] = [
      state("darkening"),
      state("ghost_present"),
      state("ghost_present", "red_mask_on"),
      state("hearts_battle"),
      state("hearts_battle", "heart_burst"),
      state("ghost_expelled"),
      state("ghost_expelled", "red_mask_off"),
      state("stable"),
      state("stable", "return_to_base"),
    ];
    for (const frame of frames) {
      model.apply(frame);
      if (model.maskOn !== previous) {
        toggles.push((frame as StateUpdate).plot);
        previous = model.maskOn;
      }
    }
    // One on-toggle entering ghost_present, one off-toggle entering ghost_expelled.
    expect(toggles).toEqual(["ghost_present", "ghost_expelled"]);
  });

  it("heart bursts queue and drain", () => {
    const model = new OverlayModel();
    model.apply(state("ghost_present"));
    model.apply(state("hearts_battle", "heart_burst"));
    model.apply(state("hearts_battle", "heart_burst"));
    model.apply(state("hearts_battle", "heart_burst"));
    expect(model.heartQueue).toBe(3);
    expect(model.consumeHearts(2)).toBe(2);
    expect(model.heartQueue).toBe(1);
  });

  it("mode switch hides and restores the narrative panel", () => {
    const model = new OverlayModel();
    model.apply(state("ghost_present"));
    expect(model.narrativeVisible).toBe(true);
    expect(model.maskOn).toBe(true);

    model.apply(stats("without_story"));
    expect(model.narrativeVisible).toBe(false);
    expect(model.plot).toBeNull();
    expect(model.maskOn).toBe(false);

    model.apply(stats("with_story"));
    expect(model.narrativeVisible).toBe(true);
    expect(model.plot).toBe("stable");
  });

  it("own comment appears once after optimistic echo", () => {
    const model = new OverlayModel();
    model.connectionChanged("live");
    const pending = model.queueSend("me", "hello room");
    expect(model.pendingSends).toHaveLength(1);
    model.sendAcknowledged(pending.localId, "p-42");
    model.apply(chat("p-42", "hello room"));
    expect(model.pendingSends).toHaveLength(0);
    const copies = model.chat.filter((item) => item.id === "p-42");
    expect(copies).toHaveLength(1);
    expect(copies[0].own).toBe(true);
  });

  it("handles broadcast racing ahead of the ack", () => {
    const model = new OverlayModel();
    model.connectionChanged("live");
    const pending = model.queueSend("me", "fast");
    model.apply(chat("p-9", "fast"));
    model.sendAcknowledged(pending.localId, "p-9");
    expect(model.pendingSends).toHaveLength(0);
    expect(model.chat.filter((item) => item.id === "p-9")).toHaveLength(1);
    expect(model.chat.find((item) => item.id === "p-9")!.own).toBe(true);
  });

  it("queues sends while dropped and flushes on reconnect", () => {
    const model = new OverlayModel();
    model.connectionChanged("dropped");
    model.queueSend("me", "offline message");
    expect(model.pendingSends[0].status).toBe("queued");
    const flushed = model.takeQueuedSends();
    expect(flushed).toHaveLength(1);
    expect(model.pendingSends[0].status).toBe("posting");
  });

  it("failed sends keep a visible marker", () => {
    const model = new OverlayModel();
    model.connectionChanged("live");
    const pending = model.queueSend("me", "rejected");
    model.sendFailed(pending.localId, "empty body");
    expect(model.pendingSends[0].status).toBe("failed");
    expect(model.pendingSends[0].error).toBe("empty body");
  });

  it("ignores stale frames after a resync", () => {
    const model = new OverlayModel();
    model.apply(chat("m-1"));
    model.apply(chat("m-2"));
    const stale: ChatUpdate = { type: "chat", seq: 1, t: 1, id: "m-1", author: "a", body: "hi", negative: false };
    model.apply(stale);
    expect(model.chat).toHaveLength(2);
  });

  it("resync snapshot sets plot, mode, and connection", () => {
    const model = new OverlayModel();
    model.resyncFromState({
      plot: "hearts_battle",
      window: null,
      mode: "with_story",
      viewers: 12_000,
      now_ms: 30_000,
      configs: { classifier: {}, detector: {}, fsm: {} },
    });
    expect(model.connection).toBe("live");
    expect(model.plot).toBe("hearts_battle");
    expect(model.maskOn).toBe(true);
    expect(model.viewers).toBe(12_000);
  });
});
