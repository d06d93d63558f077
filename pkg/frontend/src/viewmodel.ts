// View state: the latest frame, a bounded history ring for trails, the
// selected heatmap pair and its grid.  Only fully parsed frames enter;
// frames older than the newest one seen are discarded.

import { Frame, Hello, QualityGrid, ServerMessage } from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export class ViewModel {
  hello: Hello | null = null;
  latest: Frame | null = null;
  ring: Frame[] = [];
  ringCapacity: number;
  connection: ConnectionState = "connecting";
  framesSeen = 0;
  staleDropped = 0;
  lastError: string | null = null;
  selectedPair: [string, string] | null = null;
  grid: QualityGrid | null = null;

  constructor(ringCapacity = 240) {
    this.ringCapacity = ringCapacity;
  }

  ingest(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello": {
        this.hello = msg;
        const names = msg.vocabulary;
        if (this.selectedPair === null && names.length >= 2) {
          this.selectedPair = [names[0], names[1]];
        }
        break;
      }
      case "frame": {
        if (this.latest !== null && msg.t < this.latest.t) {
          this.staleDropped += 1;
          return;
        }
        this.latest = msg;
        this.framesSeen += 1;
        this.ring.push(msg);
        if (this.ring.length > this.ringCapacity) {
          this.ring.splice(0, this.ring.length - this.ringCapacity);
        }
        break;
      }
      case "error":
        this.lastError = `${msg.code}: ${msg.message}`;
        break;
      case "ack":
        if (msg.cmd === "set_motion") this.lastError = null;
        break;
    }
  }

  setConnection(state: ConnectionState): void {
    this.connection = state;
    if (state !== "connected") {
      this.latest = null;
      this.ring = [];
    }
  }

  selectPair(m: string, n: string): void {
    this.selectedPair = [m, n];
    this.grid = null; // stale until the next fetch lands
  }

  setGrid(grid: QualityGrid): void {
    const sel = this.selectedPair;
    if (sel && grid.m === sel[0] && grid.n === sel[1]) {
      this.grid = grid;
    }
  }

  // apex trail: local maxima of z along the ring, newest last
  apexTrail(): { x: number; z: number }[] {
    const out: { x: number; z: number }[] = [];
    for (let i = 1; i + 1 < this.ring.length; i++) {
      const a = this.ring[i - 1], b = this.ring[i], c = this.ring[i + 1];
      if (b.z >= a.z && b.z > c.z && b.mode === "flight") {
        out.push({ x: b.x, z: b.z });
      }
    }
    return out;
  }
}
