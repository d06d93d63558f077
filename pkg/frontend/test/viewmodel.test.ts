import { describe, expect, it } from "vitest";

import { Frame, Hello } from "../src/protocol.js";
import { ViewModel } from "../src/viewmodel.js";

const hello: Hello = {
  type: "hello", protocol: 1, vocabulary: ["Canter", "Jump", "Trot"],
  bins: 4, terrain: { segments: [[-10, 10, 0]] }, timescale: 1, frame_rate: 60,
};

function frame(t: number, extra: Partial<Frame> = {}): Frame {
  return {
    type: "frame", t, x: t, z: 1.0, vx: 1.0, vz: 0.0, mode: "flight",
    foot_x: null, motion: "Trot", phase: 0.0, alive: true, measuring: false,
    pending: null, terrain_digest: "d", ...extra,
  };
}

describe("ViewModel", () => {
  it("keeps the latest frame and counts", () => {
    const vm = new ViewModel();
    vm.ingest(hello);
    vm.ingest(frame(1));
    vm.ingest(frame(2));
    expect(vm.latest?.t).toBe(2);
    expect(vm.framesSeen).toBe(2);
  });

  it("discards stale frames", () => {
    const vm = new ViewModel();
    vm.ingest(frame(5));
    vm.ingest(frame(3));
    expect(vm.latest?.t).toBe(5);
    expect(vm.staleDropped).toBe(1);
    expect(vm.framesSeen).toBe(1);
  });

  it("bounds the history ring", () => {
    const vm = new ViewModel(10);
    for (let i = 0; i < 50; i++) vm.ingest(frame(i));
    expect(vm.ring.length).toBe(10);
    expect(vm.ring[0].t).toBe(40);
  });

  it("selects a default heatmap pair from the handshake", () => {
    const vm = new ViewModel();
    vm.ingest(hello);
    expect(vm.selectedPair).toEqual(["Canter", "Jump"]);
  });

  it("only accepts grids matching the selected pair", () => {
    const vm = new ViewModel();
    vm.ingest(hello);
    vm.selectPair("Trot", "Jump");
    vm.setGrid({ m: "Canter", n: "Jump", bins: 2, q: [[0, 0], [0, 0]] });
    expect(vm.grid).toBeNull();
    vm.setGrid({ m: "Trot", n: "Jump", bins: 2, q: [[0, 1], [0, 0]] });
    expect(vm.grid?.q[0][1]).toBe(1);
  });

  it("clears live state on disconnect", () => {
    const vm = new ViewModel();
    vm.ingest(frame(1));
    vm.setConnection("disconnected");
    expect(vm.latest).toBeNull();
    expect(vm.ring.length).toBe(0);
  });

  it("records errors and clears them on a successful motion ack", () => {
    const vm = new ViewModel();
    vm.ingest({ type: "error", cmd: "set_motion", code: "NoViableTransition",
                message: "nope" });
    expect(vm.lastError).toContain("NoViableTransition");
    vm.ingest({ type: "ack", cmd: "set_motion", ok: true });
    expect(vm.lastError).toBeNull();
  });

  it("extracts apex trail from flight maxima", () => {
    const vm = new ViewModel();
    const zs = [1.0, 1.2, 1.4, 1.3, 1.1, 1.0, 1.2, 1.5, 1.2];
    zs.forEach((z, i) => vm.ingest(frame(i, { z })));
    const trail = vm.apexTrail();
    expect(trail.map((a) => a.z)).toEqual([1.4, 1.5]);
  });
});
