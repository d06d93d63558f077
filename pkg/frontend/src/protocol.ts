// Wire protocol: JSON messages over one WebSocket, plus an HTTP endpoint
// for quality grids.  Parsing is defensive: anything malformed returns
// null and is dropped by the caller.

export interface Hello {
  type: "hello";
  protocol: number;
  vocabulary: string[];
  bins: number;
  terrain: { segments: [number, number, number][] };
  timescale: number;
  frame_rate: number;
}

export interface PendingPlan {
  target: string;
  phi_bin: number;
  omega_bin: number;
  quality: number;
}

export interface Frame {
  type: "frame";
  t: number;
  x: number;
  z: number;
  vx: number;
  vz: number;
  mode: "flight" | "stance";
  foot_x: number | null;
  motion: string;
  phase: number;
  alive: boolean;
  measuring: boolean;
  pending: PendingPlan | null;
  terrain_digest: string;
}

export interface Ack {
  type: "ack";
  cmd: string;
  ok: boolean;
  plan?: { phi_bin: number; omega_bin: number; quality: number; wait_time: number };
}

export interface ErrorMsg {
  type: "error";
  cmd: string | null;
  code: string;
  message: string;
}

export type ServerMessage = Hello | Frame | Ack | ErrorMsg;

const isNum = (v: unknown): v is number => typeof v === "number" && isFinite(v);
const isStr = (v: unknown): v is string => typeof v === "string";

export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const m = doc as Record<string, unknown>;
  switch (m.type) {
    case "hello":
      if (!isNum(m.protocol) || !Array.isArray(m.vocabulary) || !isNum(m.bins))
        return null;
      return m as unknown as Hello;
    case "frame":
      if (!isNum(m.t) || !isNum(m.x) || !isNum(m.z) || !isStr(m.motion)
          || !isNum(m.phase) || typeof m.alive !== "boolean")
        return null;
      return m as unknown as Frame;
    case "ack":
      if (!isStr(m.cmd)) return null;
      return m as unknown as Ack;
    case "error":
      if (!isStr(m.code)) return null;
      return m as unknown as ErrorMsg;
    default:
      return null;
  }
}

export const commands = {
  setMotion: (motion: string) => JSON.stringify({ type: "set_motion", motion }),
  perturb: (dvx: number, dvz: number) =>
    JSON.stringify({ type: "perturb", dvx, dvz }),
  pause: () => JSON.stringify({ type: "pause" }),
  resume: () => JSON.stringify({ type: "resume" }),
  reset: () => JSON.stringify({ type: "reset" }),
  setTimescale: (value: number) =>
    JSON.stringify({ type: "set_timescale", value }),
};

export interface QualityGrid {
  m: string;
  n: string;
  bins: number;
  q: number[][];
}

export async function fetchQualityGrid(
  base: string, m: string, n: string,
  fetchFn: typeof fetch = fetch): Promise<QualityGrid> {
  const url = `${base}/quality_grid?m=${encodeURIComponent(m)}&n=${encodeURIComponent(n)}`;
  const resp = await fetchFn(url);
  if (!resp.ok) throw new Error(`quality_grid ${resp.status}`);
  const doc = (await resp.json()) as QualityGrid;
  if (!isNum(doc.bins) || !Array.isArray(doc.q)) throw new Error("bad grid");
  return doc;
}
