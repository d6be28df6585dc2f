import { describe, expect, it } from "vitest";

import { FocusResponse } from "../src/api.js";
import { parsePgm } from "../src/pgm.js";
import { Viewer } from "../src/viewer.js";
import {
  FakeApi,
  FakeClock,
  RecorderDisplay,
  flushMicrotasks,
  rampScene,
} from "./fakes.js";

function makeViewer(scene = rampScene()) {
  const api = new FakeApi(scene);
  const clock = new FakeClock();
  const display = new RecorderDisplay();
  const viewer = new Viewer(api, display, clock);
  return { api, clock, display, viewer, scene };
}

async function hoverSlowly(
  viewer: Viewer,
  clock: FakeClock,
  points: Array<[number, number]>
) {
  for (const [x, y] of points) {
    await clock.advance(40); // outside the throttle window
    await viewer.onHover(x, y);
    await flushMicrotasks();
  }
}

describe("hover traversal", () => {
  it("displays exactly round(depth) of every served valid response", async () => {
    const { viewer, clock, display } = makeViewer();
    const path: Array<[number, number]> = [];
    for (let x = 0; x < 32; x++) path.push([x, 4]);
    await hoverSlowly(viewer, clock, path);

    const validResponses = viewer.requestLog.filter((r) => r.response.valid);
    expect(display.frames).toEqual(
      validResponses.map((r) => Math.round(r.response.depth_index))
    );
    // every displayed decision is traceable to a served response
    const served = new Set(
      viewer.requestLog.map((r) => r.response.nearest_frame)
    );
    for (const z of display.frames) {
      expect(served.has(z)).toBe(true);
    }
  });

  it("moves the frame monotonically along a monotone depth path", async () => {
    const { viewer, clock, display, scene } = makeViewer();
    const path: Array<[number, number]> = [];
    for (let x = 0; x < scene.width; x++) {
      if (scene.valid[2][x]) path.push([x, 2]);
    }
    await hoverSlowly(viewer, clock, path);
    for (let i = 1; i < display.frames.length; i++) {
      expect(display.frames[i]).toBeGreaterThanOrEqual(display.frames[i - 1]);
    }
  });

  it("keeps the frame and shows the badge on unmeasurable pixels", async () => {
    const { viewer, clock, display, scene } = makeViewer();
    expect(scene.valid[4][9]).toBe(true);
    expect(scene.valid[4][3]).toBe(false);
    await hoverSlowly(viewer, clock, [[9, 4]]);
    const before = viewer.state.currentFrame;
    const framesBefore = display.frames.length;
    await hoverSlowly(viewer, clock, [[3, 4]]); // column 3 is invalid
    expect(viewer.state.currentFrame).toBe(before);
    expect(display.frames.length).toBe(framesBefore);
    expect(display.badge).toBe(true);
    expect(viewer.state.lastFocus?.valid).toBe(false);
    await hoverSlowly(viewer, clock, [[9, 4]]);
    expect(display.badge).toBe(false);
  });
});

describe("frame cache", () => {
  it("fetches each frame at most once per session", async () => {
    const { viewer, clock, api, scene } = makeViewer();
    const path: Array<[number, number]> = [];
    for (let pass = 0; pass < 3; pass++) {
      for (let x = 0; x < scene.width; x += 2) path.push([x, 1]);
    }
    await hoverSlowly(viewer, clock, path);
    for (const [, count] of api.frameFetches) {
      expect(count).toBe(1);
    }
    expect(api.frameFetches.size).toBeGreaterThan(1);
  });
});

describe("throttling", () => {
  it("stays at or under 30 requests per second of hover spam", async () => {
    const { viewer, clock, api } = makeViewer();
    for (let i = 0; i < 200; i++) {
      void viewer.onHover(i % 32, 4);
      await clock.advance(5); // 200 Hz hover stream for 1s
    }
    await clock.advance(100);
    expect(api.focusCalls.length).lessThanOrEqual(31);
    // the trailing request delivered the latest position
    const last = api.focusCalls[api.focusCalls.length - 1];
    expect(last).toEqual([199 % 32, 4]);
  });
});

describe("out-of-order responses", () => {
  it("discards a stale response that resolves after a newer one", async () => {
    const scene = rampScene();
    const api = new FakeApi(scene);
    const resolvers: Array<(r: FocusResponse) => void> = [];
    const responses: FocusResponse[] = [];
    api.focus = async (x, y) => {
      api.focusCalls.push([x, y]);
      const d = scene.depth[y][x];
      responses.push({
        depth_index: d,
        focal_length_mm: 50 + d,
        nearest_frame: Math.floor(d + 0.5),
        valid: true,
      });
      return new Promise((resolve) => resolvers.push(resolve));
    };
    const clock = new FakeClock();
    const display = new RecorderDisplay();
    const viewer = new Viewer(api, display, clock);

    void viewer.onHover(2, 1);
    await clock.advance(40);
    void viewer.onHover(30, 1);
    await flushMicrotasks();
    expect(resolvers.length).toBe(2);
    resolvers[1](responses[1]); // newer response lands first
    await flushMicrotasks();
    resolvers[0](responses[0]); // stale one arrives late
    await flushMicrotasks();

    expect(viewer.requestLog.length).toBe(1);
    expect(viewer.requestLog[0].x).toBe(30);
    expect(viewer.state.currentFrame).toBe(responses[1].nearest_frame);
    expect(display.frames).toEqual([responses[1].nearest_frame]);
  });
});

describe("overlay", () => {
  it("marks exactly the unmeasurable pixels red on 100 sampled points", async () => {
    const { viewer, display, scene } = makeViewer();
    await viewer.toggleOverlay();
    expect(display.overlay).not.toBeNull();
    const { rgba, width, height } = display.overlay!;
    expect([width, height]).toEqual([scene.width, scene.height]);
    let rngState = 12345;
    const rand = () => {
      rngState = (rngState * 1103515245 + 12345) & 0x7fffffff;
      return rngState / 0x80000000;
    };
    for (let i = 0; i < 100; i++) {
      const x = Math.floor(rand() * width);
      const y = Math.floor(rand() * height);
      const o = (y * width + x) * 4;
      const isRed =
        rgba[o] === 255 && rgba[o + 1] === 0 && rgba[o + 2] === 0;
      expect(isRed).toBe(!scene.valid[y][x]);
      expect(rgba[o + 3]).toBe(128); // 50% blend
    }
  });

  it("reflects the view-step normalization on valid pixels", async () => {
    const { viewer, display, scene } = makeViewer();
    await viewer.toggleOverlay();
    const { rgba, width } = display.overlay!;
    const x = 0; // depth 0 -> intensity 1
    expect(scene.valid[0][x]).toBe(true);
    expect(rgba[(0 * width + x) * 4]).toBe(1);
  });

  it("restores the plain view when toggled twice and reuses the preview", async () => {
    const { viewer, display, api } = makeViewer();
    await viewer.toggleOverlay();
    await viewer.toggleOverlay();
    expect(display.overlay).toBeNull();
    expect(viewer.state.overlayOn).toBe(false);
    await viewer.toggleOverlay();
    expect(display.overlay).not.toBeNull();
    expect(api.previewFetches).toBe(1);
  });
});

describe("service failures", () => {
  it("freezes the frame and raises the banner when unreachable", async () => {
    const { viewer, clock, display, api } = makeViewer();
    await hoverSlowly(viewer, clock, [[9, 4]]);
    const before = viewer.state.currentFrame;
    expect(display.frames.length).toBe(1);
    api.focus = async () => {
      throw new Error("connection refused");
    };
    await hoverSlowly(viewer, clock, [[20, 4]]);
    expect(viewer.state.currentFrame).toBe(before);
    expect(display.banner).toContain("unreachable");
  });
});

describe("pgm parsing", () => {
  it("round-trips the fake preview header", async () => {
    const { api, scene } = makeViewer();
    const img = parsePgm(await api.preview());
    expect(img.width).toBe(scene.width);
    expect(img.height).toBe(scene.height);
    expect(img.data.length).toBe(scene.width * scene.height);
  });

  it("rejects non-P5 data", () => {
    expect(() => parsePgm(new TextEncoder().encode("P6\n1 1\n255\n").buffer))
      .toThrow();
  });
});
