// Viewer overlay entry point: one WebSocket, resync via GET /state,
// comment composer posting through the participant chat endpoint.

import { AdminClient, ChatClient } from "./adminClient.js";
import { OverlayModel } from "./overlayModel.js";
import { buildOverlay, renderOverlay } from "./render.js";
import { ReconnectingSocket } from "./wsClient.js";

function wsUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

export function startOverlay(root: HTMLElement): void {
  const model = new OverlayModel();
  const refs = buildOverlay(root);
  const stateClient = new AdminClient("");
  const params = new URLSearchParams(location.search);
  const chatClient = new ChatClient("", params.get("token"));
  const author = params.get("author") ?? `viewer${Math.floor(Math.random() * 1000)}`;

  const repaint = () => renderOverlay(refs, model);

  async function postPending(localId: string, body: string): Promise<void> {
    try {
      const serverId = await chatClient.postComment(author, body);
      model.sendAcknowledged(localId, serverId);
    } catch (error) {
      model.sendFailed(localId, error instanceof Error ? error.message : String(error));
    }
    repaint();
  }

  const socket = new ReconnectingSocket(wsUrl(), {
    onUpdate: (update) => {
      model.apply(update);
      repaint();
    },
    onOpen: async () => {
      const state = await stateClient.getState();
      model.resyncFromState(state);
      for (const pending of model.takeQueuedSends()) {
        void postPending(pending.localId, pending.body);
      }
      repaint();
    },
    onDisconnect: () => {
      model.connectionChanged("dropped");
      repaint();
    },
  });

  refs.composerInput.addEventListener("input", repaint);
  const submit = () => {
    const body = refs.composerInput.value.trim();
    if (!body) {
      return;
    }
    refs.composerInput.value = "";
    const pending = model.queueSend(author, body);
    if (pending.status === "posting") {
      void postPending(pending.localId, pending.body);
    }
    repaint();
  };
  refs.composerSend.addEventListener("click", submit);
  refs.composerInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      submit();
    }
  });

  socket.connect();
  repaint();
}

if (typeof document !== "undefined") {
  const root = document.getElementById("overlay-root");
  if (root) {
    startOverlay(root);
  }
}
