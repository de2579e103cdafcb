// Placeholder scene art per plot state. Production art is a drop-in swap:
// keep the tokens, replace art/background/caption.

import { MASKED_TOKENS, PLOT_TOKENS, type PlotToken } from "./protocol.js";

export interface SceneSpec {
  token: PlotToken;
  label: string;
  art: string;
  background: string;
  caption: string;
}

export const SCENES: Record<PlotToken, SceneSpec> = {
  stable: {
    token: "stable",
    label: "Cozy room",
    art: "🐻💻",
    background: "#f5d9a8",
    caption: "Berry works away in a warm, cozy room.",
  },
  darkening: {
    token: "darkening",
    label: "Storm rolling in",
    art: "🌩️🐻",
    background: "#7b86a3",
    caption: "Thunder and lightning: the room darkens.",
  },
  ghost_present: {
    token: "ghost_present",
    label: "The ghost appears",
    art: "👻🐻",
    background: "#41355c",
    caption: "An evil ghost looms; Berry is frightened.",
  },
  hearts_battle: {
    token: "hearts_battle",
    label: "Hearts fight back",
    art: "💞👻",
    background: "#8a3b5c",
    caption: "Hearts stream from Berry's computer, battering the ghost.",
  },
  ghost_expelled: {
    token: "ghost_expelled",
    label: "Ghost chased away",
    art: "🌈🐻",
    background: "#9fd8a0",
    caption: "The hearts swarm; the ghost flees the room.",
  },
};

export interface SceneLookup {
  scene: SceneSpec;
  known: boolean;
}

export function sceneFor(token: string): SceneLookup {
  if ((PLOT_TOKENS as readonly string[]).includes(token)) {
    return { scene: SCENES[token as PlotToken], known: true };
  }
  // Unknown tokens degrade to the stable scene with a visible warning badge.
  return { scene: SCENES.stable, known: false };
}

export function maskOnFor(token: string | null): boolean {
  return token !== null && MASKED_TOKENS.has(token);
}
