import { describe, expect, it } from "vitest";

import { commands, fetchQualityGrid, parseServerMessage } from "../src/protocol.js";

describe("parseServerMessage", () => {
  it("parses a hello", () => {
    const msg = parseServerMessage(JSON.stringify({
      type: "hello", protocol: 1, vocabulary: ["Trot"], bins: 20,
      terrain: { segments: [[-1, 1, 0]] }, timescale: 1, frame_rate: 60,
    }));
    expect(msg?.type).toBe("hello");
    if (msg?.type === "hello") expect(msg.bins).toBe(20);
  });

  it("parses a frame", () => {
    const msg = parseServerMessage(JSON.stringify({
      type: "frame", t: 1.5, x: 0.2, z: 1.1, vx: 1.4, vz: -0.2,
      mode: "flight", foot_x: null, motion: "Trot", phase: 0.4,
      alive: true, measuring: false, pending: null, terrain_digest: "abc",
    }));
    expect(msg?.type).toBe("frame");
    if (msg?.type === "frame") expect(msg.motion).toBe("Trot");
  });

  it("parses acks and errors", () => {
    expect(parseServerMessage('{"type":"ack","cmd":"pause","ok":true}')?.type)
      .toBe("ack");
    const err = parseServerMessage(
      '{"type":"error","cmd":null,"code":"BadPayload","message":"x"}');
    expect(err?.type).toBe("error");
  });

  it("rejects garbage", () => {
    expect(parseServerMessage("{nope")).toBeNull();
    expect(parseServerMessage('"just a string"')).toBeNull();
    expect(parseServerMessage('{"type":"frame","t":"NaN?"}')).toBeNull();
    expect(parseServerMessage('{"type":"mystery"}')).toBeNull();
    expect(parseServerMessage('{"type":"hello","protocol":"x"}')).toBeNull();
  });
});

describe("commands", () => {
  it("serializes per protocol", () => {
    expect(JSON.parse(commands.setMotion("Jump")))
      .toEqual({ type: "set_motion", motion: "Jump" });
    expect(JSON.parse(commands.perturb(0.3, 0)))
      .toEqual({ type: "perturb", dvx: 0.3, dvz: 0 });
    expect(JSON.parse(commands.pause())).toEqual({ type: "pause" });
    expect(JSON.parse(commands.resume())).toEqual({ type: "resume" });
    expect(JSON.parse(commands.reset())).toEqual({ type: "reset" });
    expect(JSON.parse(commands.setTimescale(2)))
      .toEqual({ type: "set_timescale", value: 2 });
  });
});

describe("fetchQualityGrid", () => {
  it("fetches and validates", async () => {
    const stub = (async (url: RequestInfo | URL) => {
      expect(String(url)).toContain("/quality_grid?m=Trot&n=Jump");
      return {
        ok: true,
        json: async () => ({ m: "Trot", n: "Jump", bins: 2, q: [[0, 1], [2, 3]] }),
      } as Response;
    }) as typeof fetch;
    const grid = await fetchQualityGrid("http://h", "Trot", "Jump", stub);
    expect(grid.q[1][0]).toBe(2);
  });

  it("raises on http errors", async () => {
    const stub = (async () => ({ ok: false, status: 404 } as Response)) as typeof fetch;
    await expect(fetchQualityGrid("http://h", "A", "B", stub)).rejects.toThrow("404");
  });
});
