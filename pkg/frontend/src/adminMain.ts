// Admin panel: threshold slider, rule toggles, mode switch, viewer count,
// notice broadcast, live window stats. Every change posts to /admin/* and
// re-reads GET /state so the panel always shows the server's values.

import { AdminClient, AdminError } from "./adminClient.js";
import type { EngineMode, EngineState, Update } from "./protocol.js";
import { ReconnectingSocket } from "./wsClient.js";

const RULES = ["profanity", "caps", "emote_spam", "symbol_spam"] as const;

function wsUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

export function startAdmin(root: HTMLElement): void {
  const params = new URLSearchParams(location.search);
  const client = new AdminClient("", params.get("token"));

  root.innerHTML = `
    <div class="admin">
      <div class="error-banner hidden" data-ref="error"></div>
      <section class="card">
        <h2>Negativity threshold</h2>
        <label>per 10k viewers / window
          <input data-ref="threshold-slider" type="range" min="0" max="10" step="0.01" />
        </label>
        <input data-ref="threshold-value" type="number" min="0" step="0.01" />
        <button data-ref="threshold-apply">apply</button>
      </section>
      <section class="card">
        <h2>Filter rules</h2>
        <div data-ref="rules"></div>
        <label>caps ratio max <input data-ref="caps-ratio" type="number" min="0" max="1" step="0.05"></label>
        <label>emote count max <input data-ref="emote-max" type="number" min="0" step="1"></label>
        <label>symbol ratio max <input data-ref="symbol-ratio" type="number" min="0" max="1" step="0.05"></label>
        <button data-ref="filter-apply">apply filter</button>
      </section>
      <section class="card">
        <h2>Session</h2>
        <label><input data-ref="mode-toggle" type="checkbox" /> story mode</label>
        <label>viewers <input data-ref="viewers" type="number" min="0" step="100"></label>
        <button data-ref="viewers-apply">set viewers</button>
        <div class="notice-row">
          <input data-ref="notice-text" type="text" maxlength="500" placeholder="broadcast notice" />
          <button data-ref="notice-send">broadcast</button>
        </div>
      </section>
      <section class="card">
        <h2>Live</h2>
        <div data-ref="live-plot"></div>
        <div data-ref="live-window"></div>
        <div data-ref="live-clients"></div>
      </section>
    </div>`;

  const ref = (name: string) => root.querySelector<HTMLElement>(`[data-ref="${name}"]`)!;
  const input = (name: string) => ref(name) as HTMLInputElement;
  const errorBanner = ref("error");

  const rulesBox = ref("rules");
  for (const rule of RULES) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.dataset.rule = rule;
    label.append(box, document.createTextNode(` ${rule}`));
    rulesBox.appendChild(label);
  }

  function showError(error: unknown): void {
    errorBanner.classList.remove("hidden");
    errorBanner.textContent =
      error instanceof AdminError
        ? `${error.status === 401 ? "auth failed: " : ""}${error.message} (retry below)`
        : String(error);
  }

  function clearError(): void {
    errorBanner.classList.add("hidden");
  }

  function paintState(state: EngineState): void {
    const detector = state.configs.detector as { threshold_per_10k?: number };
    const classifier = state.configs.classifier as {
      enabled_rules?: string[];
      caps_ratio_max?: number;
      emote_count_max?: number;
      symbol_ratio_max?: number;
    };
    if (document.activeElement !== input("threshold-value")) {
      input("threshold-value").value = String(detector.threshold_per_10k ?? "");
      input("threshold-slider").value = String(detector.threshold_per_10k ?? 0);
    }
    const enabled = new Set(classifier.enabled_rules ?? []);
    rulesBox.querySelectorAll<HTMLInputElement>("input[data-rule]").forEach((box) => {
      box.checked = enabled.has(box.dataset.rule!);
    });
    input("caps-ratio").value = String(classifier.caps_ratio_max ?? "");
    input("emote-max").value = String(classifier.emote_count_max ?? "");
    input("symbol-ratio").value = String(classifier.symbol_ratio_max ?? "");
    input("mode-toggle").checked = state.mode === "with_story";
    input("viewers").value = String(state.viewers);
    ref("live-plot").textContent = state.plot ? `plot: ${state.plot}` : "plot: (story off)";
    ref("live-clients").textContent = `clients: ${state.clients ?? 0}`;
    if (state.window) {
      ref("live-window").textContent =
        `window ${state.window.window_end_ms / 1000}s: ${state.window.negative_count} negative, ` +
        `threshold ${state.window.effective_threshold.toFixed(2)}, ` +
        (state.window.exceeded ? "EXCEEDED" : "below");
    }
  }

  async function refresh(): Promise<void> {
    try {
      paintState(await client.getState());
      clearError();
    } catch (error) {
      showError(error);
    }
  }

  async function act(op: () => Promise<unknown>): Promise<void> {
    try {
      await op();
      clearError();
    } catch (error) {
      showError(error);
    }
    await refresh();
  }

  input("threshold-slider").addEventListener("input", () => {
    input("threshold-value").value = input("threshold-slider").value;
  });
  ref("threshold-apply").addEventListener("click", () =>
    act(() => client.setThreshold(Number(input("threshold-value").value))),
  );
  ref("filter-apply").addEventListener("click", () => {
    const enabled = Array.from(
      rulesBox.querySelectorAll<HTMLInputElement>("input[data-rule]:checked"),
    ).map((box) => box.dataset.rule!);
    return act(() =>
      client.setFilter({
        enabled_rules: enabled,
        caps_ratio_max: Number(input("caps-ratio").value),
        emote_count_max: Number(input("emote-max").value),
        symbol_ratio_max: Number(input("symbol-ratio").value),
      }),
    );
  });
  input("mode-toggle").addEventListener("change", () => {
    const mode: EngineMode = input("mode-toggle").checked ? "with_story" : "without_story";
    return act(() => client.setMode(mode));
  });
  ref("viewers-apply").addEventListener("click", () =>
    act(() => client.setViewers(Number(input("viewers").value))),
  );
  ref("notice-send").addEventListener("click", () => {
    const text = input("notice-text").value;
    return act(async () => {
      await client.sendNotice(text);
      input("notice-text").value = "";
    });
  });

  // Live stats ride the same fan-out stream the viewers see.
  const socket = new ReconnectingSocket(wsUrl(), {
    onUpdate: (update: Update) => {
      if (update.type === "stats" || update.type === "state") {
        void refresh();
      }
    },
    onOpen: () => refresh(),
    onDisconnect: () => showError(new Error("stream dropped; reconnecting")),
  });
  socket.connect();
  void refresh();
}

if (typeof document !== "undefined") {
  const root = document.getElementById("admin-root");
  if (root) {
    startAdmin(root);
  }
}
