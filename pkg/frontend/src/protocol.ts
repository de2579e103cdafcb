// Wire contract with the engine: WebSocket update frames and GET /state.

export type PlotToken =
  | "stable"
  | "darkening"
  | "ghost_present"
  | "hearts_battle"
  | "ghost_expelled";

export const PLOT_TOKENS: readonly PlotToken[] = [
  "stable",
  "darkening",
  "ghost_present",
  "hearts_battle",
  "ghost_expelled",
];

export const MASKED_TOKENS: ReadonlySet<string> = new Set(["ghost_present", "hearts_battle"]);

export type EngineMode = "with_story" | "without_story";

export interface WindowVerdict {
  window_end_ms: number;
  negative_count: number;
  viewer_count: number;
  effective_threshold: number;
  exceeded: boolean;
}

export interface ChatUpdate {
  type: "chat";
  seq: number;
  t: number;
  id: string;
  author: string;
  body: string;
  negative: boolean;
  source?: string;
}

export interface StateUpdate {
  type: "state";
  seq: number;
  t: number;
  plot: string;
  event: string;
}

export interface NoticeUpdate {
  type: "notice";
  seq: number;
  t: number;
  text: string;
}

export interface StatsUpdate {
  type: "stats";
  seq: number;
  t: number;
  window: WindowVerdict | null;
  mode: EngineMode;
  viewers: number;
}

export type Update = ChatUpdate | StateUpdate | NoticeUpdate | StatsUpdate;

export interface EngineState {
  plot: string | null;
  window: WindowVerdict | null;
  mode: EngineMode;
  viewers: number;
  now_ms: number;
  configs: {
    classifier: Record<string, unknown>;
    detector: Record<string, unknown>;
    fsm: Record<string, unknown>;
  };
  session_id?: string;
  clients?: number;
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null;
}

export function parseUpdate(raw: string): Update | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(data) || typeof data.seq !== "number" || typeof data.t !== "number") {
    return null;
  }
  switch (data.type) {
    case "chat":
      if (
        typeof data.id === "string" &&
        typeof data.author === "string" &&
        typeof data.body === "string" &&
        typeof data.negative === "boolean"
      ) {
        return data as unknown as ChatUpdate;
      }
      return null;
    case "state":
      if (typeof data.plot === "string" && typeof data.event === "string") {
        return data as unknown as StateUpdate;
      }
      return null;
    case "notice":
      if (typeof data.text === "string") {
        return data as unknown as NoticeUpdate;
      }
      return null;
    case "stats":
      if (data.mode === "with_story" || data.mode === "without_story") {
        return data as unknown as StatsUpdate;
      }
      return null;
    default:
      return null;
  }
}
