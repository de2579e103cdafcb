// DOM rendering for the viewer overlay. buildOverlay creates the structure
// once; renderOverlay mutates it from the model on every change.

import { OverlayModel } from "./overlayModel.js";
import { sceneFor } from "./scenes.js";

export interface OverlayRefs {
  root: HTMLElement;
  narrativePanel: HTMLElement;
  scene: HTMLElement;
  sceneArt: HTMLElement;
  sceneLabel: HTMLElement;
  sceneCaption: HTMLElement;
  warningBadge: HTMLElement;
  mask: HTMLElement;
  hearts: HTMLElement;
  chatList: HTMLElement;
  pendingList: HTMLElement;
  noticeBar: HTMLElement;
  statsLine: HTMLElement;
  connectionBadge: HTMLElement;
  composerInput: HTMLInputElement;
  composerSend: HTMLButtonElement;
}

export function buildOverlay(root: HTMLElement): OverlayRefs {
  root.innerHTML = `
    <div class="overlay">
      <section class="narrative" data-ref="narrative">
        <div class="scene" data-ref="scene">
          <div class="scene-art" data-ref="scene-art"></div>
          <div class="scene-label" data-ref="scene-label"></div>
          <div class="scene-caption" data-ref="scene-caption"></div>
          <div class="warning-badge hidden" data-ref="warning">unknown scene</div>
          <div class="red-mask" data-ref="mask"></div>
          <div class="hearts" data-ref="hearts"></div>
        </div>
        <div class="stats-line" data-ref="stats"></div>
      </section>
      <section class="chatroom">
        <div class="notice-bar hidden" data-ref="notices"></div>
        <ul class="chat-list" data-ref="chat"></ul>
        <ul class="pending-list" data-ref="pending"></ul>
        <div class="composer">
          <input data-ref="composer-input" type="text" maxlength="500"
                 placeholder="say something nice" />
          <button data-ref="composer-send" disabled>send</button>
          <span class="connection-badge" data-ref="connection">connecting</span>
        </div>
      </section>
    </div>`;
  const ref = (name: string) => root.querySelector<HTMLElement>(`[data-ref="${name}"]`)!;
  return {
    root,
    narrativePanel: ref("narrative"),
    scene: ref("scene"),
    sceneArt: ref("scene-art"),
    sceneLabel: ref("scene-label"),
    sceneCaption: ref("scene-caption"),
    warningBadge: ref("warning"),
    mask: ref("mask"),
    hearts: ref("hearts"),
    chatList: ref("chat"),
    pendingList: ref("pending"),
    noticeBar: ref("notices"),
    statsLine: ref("stats"),
    connectionBadge: ref("connection"),
    composerInput: ref("composer-input") as HTMLInputElement,
    composerSend: ref("composer-send") as HTMLButtonElement,
  };
}

export function renderOverlay(refs: OverlayRefs, model: OverlayModel): void {
  refs.narrativePanel.classList.toggle("hidden", !model.narrativeVisible);
  if (model.narrativeVisible && model.plot !== null) {
    const { scene, known } = sceneFor(model.plot);
    refs.scene.dataset.plot = scene.token;
    refs.sceneArt.textContent = scene.art;
    refs.sceneLabel.textContent = scene.label;
    refs.sceneCaption.textContent = scene.caption;
    refs.scene.style.backgroundColor = scene.background;
    refs.warningBadge.classList.toggle("hidden", known);
  }
  refs.mask.classList.toggle("mask-on", model.maskOn);

  for (let burst = model.consumeHearts(); burst > 0; burst -= 1) {
    spawnHeart(refs.hearts);
  }

  renderChat(refs, model);

  refs.noticeBar.classList.toggle("hidden", model.notices.length === 0);
  refs.noticeBar.textContent = model.notices[model.notices.length - 1] ?? "";

  refs.statsLine.textContent = model.stats
    ? `window ${model.stats.window_end_ms / 1000}s: ${model.stats.negative_count} negative ` +
      `(threshold ${model.stats.effective_threshold.toFixed(2)}, ${model.viewers} viewers)`
    : "";

  refs.connectionBadge.textContent = model.connection;
  refs.connectionBadge.dataset.state = model.connection;
  refs.composerSend.disabled = refs.composerInput.value.trim() === "";
}

function renderChat(refs: OverlayRefs, model: OverlayModel): void {
  const list = refs.chatList;
  while (list.children.length > model.chat.length) {
    list.removeChild(list.firstChild!);
  }
  // Rendered order equals received seq order: rebuild tail-aligned.
  const start = Math.max(0, model.chat.length - 200);
  list.innerHTML = "";
  for (const item of model.chat.slice(start)) {
    const entry = document.createElement("li");
    entry.dataset.id = item.id;
    entry.className = item.negative ? "chat-item negative" : "chat-item";
    if (item.own) {
      entry.classList.add("own");
    }
    const author = document.createElement("span");
    author.className = "author";
    author.textContent = item.author;
    const body = document.createElement("span");
    body.className = "body";
    body.textContent = item.body;
    entry.append(author, body);
    list.appendChild(entry);
  }
  list.scrollTop = list.scrollHeight;

  refs.pendingList.innerHTML = "";
  for (const pending of model.pendingSends) {
    const entry = document.createElement("li");
    entry.className = `pending-item ${pending.status}`;
    entry.textContent =
      pending.status === "failed"
        ? `${pending.body} — failed: ${pending.error ?? "rejected"}`
        : `${pending.body} — ${pending.status}`;
    refs.pendingList.appendChild(entry);
  }
}

function spawnHeart(container: HTMLElement): void {
  const heart = document.createElement("span");
  heart.className = "heart";
  heart.textContent = "💖";
  heart.style.left = `${10 + Math.random() * 80}%`;
  container.appendChild(heart);
  setTimeout(() => heart.remove(), 1800);
}
