/**
 * Hover-driven focus viewer logic, kept free of DOM so it can be tested
 * against a scripted service.
 *
 * The displayed frame is always the `nearest_frame` served by /focus for
 * the pixel under the cursor; the viewer never derives depth on its own.
 * Hovers are throttled to at most 30 requests per second (leading call
 * immediate, latest position trailing), responses arriving out of order
 * are dropped by sequence number, and each stack frame is fetched at
 * most once per session.
 */

import { FocusApi, FocusResponse } from "./api.js";
import { parsePgm, previewToOverlayRgba } from "./pgm.js";

export interface Clock {
  now(): number;
  schedule(fn: () => void, delayMs: number): void;
}

export const realClock: Clock = {
  now: () => Date.now(),
  schedule: (fn, delayMs) => {
    setTimeout(fn, delayMs);
  },
};

export interface Display {
  showFrame(z: number, image: Blob): void;
  setBadge(visible: boolean): void;
  setBanner(message: string | null): void;
  setOverlay(
    rgba: Uint8ClampedArray | null,
    width: number,
    height: number
  ): void;
}

export interface LoggedRequest {
  x: number;
  y: number;
  response: FocusResponse;
}

export interface ViewerState {
  currentFrame: number;
  cursor: [number, number] | null;
  lastFocus: FocusResponse | null;
  overlayOn: boolean;
}

const MAX_REQUESTS_PER_SECOND = 30;

export class Viewer {
  readonly requestLog: LoggedRequest[] = [];
  private currentFrame = 0;
  private cursor: [number, number] | null = null;
  private lastFocus: FocusResponse | null = null;
  private overlayOn = false;

  private readonly minIntervalMs: number;
  private lastSentAt = -Infinity;
  private pending: [number, number] | null = null;
  private timerArmed = false;

  private seqCounter = 0;
  private latestHandled = 0;

  private readonly frameCache = new Map<number, Promise<Blob>>();
  private overlayPixels: {
    rgba: Uint8ClampedArray;
    width: number;
    height: number;
  } | null = null;

  constructor(
    private readonly api: FocusApi,
    private readonly display: Display,
    private readonly clock: Clock = realClock,
    requestsPerSecond: number = MAX_REQUESTS_PER_SECOND
  ) {
    this.minIntervalMs = 1000 / requestsPerSecond;
  }

  get state(): ViewerState {
    return {
      currentFrame: this.currentFrame,
      cursor: this.cursor,
      lastFocus: this.lastFocus,
      overlayOn: this.overlayOn,
    };
  }

  /** Hover handler; resolves once any resulting display update landed. */
  async onHover(x: number, y: number): Promise<void> {
    this.cursor = [x, y];
    const now = this.clock.now();
    if (now - this.lastSentAt >= this.minIntervalMs) {
      this.lastSentAt = now;
      await this.issue(x, y);
      return;
    }
    // inside the throttle window: remember only the latest position and
    // arm a single trailing-edge timer
    this.pending = [x, y];
    if (!this.timerArmed) {
      this.timerArmed = true;
      const delay = this.lastSentAt + this.minIntervalMs - now;
      this.clock.schedule(() => {
        this.timerArmed = false;
        const p = this.pending;
        this.pending = null;
        if (p) {
          this.lastSentAt = this.clock.now();
          void this.issue(p[0], p[1]);
        }
      }, delay);
    }
  }

  private async issue(x: number, y: number): Promise<void> {
    const seq = ++this.seqCounter;
    let response: FocusResponse;
    try {
      response = await this.api.focus(x, y);
    } catch (err) {
      this.display.setBanner(`focus service unreachable: ${err}`);
      return;
    }
    if (seq <= this.latestHandled) {
      return; // a newer response already landed
    }
    this.latestHandled = seq;
    this.display.setBanner(null);
    this.requestLog.push({ x, y, response });
    this.lastFocus = response;
    if (!response.valid) {
      this.display.setBadge(true);
      return; // frame stays where it was
    }
    this.display.setBadge(false);
    const z = response.nearest_frame;
    this.currentFrame = z;
    try {
      const image = await this.fetchFrame(z);
      if (this.currentFrame === z) {
        this.display.showFrame(z, image);
      }
    } catch (err) {
      this.display.setBanner(`frame ${z} unavailable: ${err}`);
    }
  }

  private fetchFrame(z: number): Promise<Blob> {
    let cached = this.frameCache.get(z);
    if (!cached) {
      cached = this.api.frame(z);
      this.frameCache.set(z, cached);
    }
    return cached;
  }

  /** Blend the depth preview over the frame, or remove it again. */
  async toggleOverlay(): Promise<void> {
    if (this.overlayOn) {
      this.overlayOn = false;
      this.display.setOverlay(null, 0, 0);
      return;
    }
    try {
      if (!this.overlayPixels) {
        const img = parsePgm(await this.api.preview());
        this.overlayPixels = {
          rgba: previewToOverlayRgba(img),
          width: img.width,
          height: img.height,
        };
      }
    } catch (err) {
      this.display.setBanner(`preview unavailable: ${err}`);
      return;
    }
    this.overlayOn = true;
    const { rgba, width, height } = this.overlayPixels;
    this.display.setOverlay(rgba, width, height);
  }
}
