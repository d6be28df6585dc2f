/** DOM wiring: stacked canvases over the focus service. */

import { HttpFocusApi } from "./api.js";
import { Display, Viewer } from "./viewer.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "http://127.0.0.1:8713";
  const api = new HttpFocusApi(base);
  const meta = await api.meta();

  const frameCanvas = el<HTMLCanvasElement>("frame");
  const overlayCanvas = el<HTMLCanvasElement>("overlay");
  for (const canvas of [frameCanvas, overlayCanvas]) {
    canvas.width = meta.width;
    canvas.height = meta.height;
  }
  const frameCtx = frameCanvas.getContext("2d")!;
  const overlayCtx = overlayCanvas.getContext("2d")!;
  const badge = el<HTMLSpanElement>("badge");
  const banner = el<HTMLDivElement>("banner");
  const frameLabel = el<HTMLSpanElement>("frame-label");

  const display: Display = {
    showFrame(z, image) {
      void createImageBitmap(image).then((bitmap) => {
        frameCtx.drawImage(bitmap, 0, 0);
        frameLabel.textContent = `frame ${z} / ${meta.depth_count - 1}`;
      });
    },
    setBadge(visible) {
      badge.style.visibility = visible ? "visible" : "hidden";
    },
    setBanner(message) {
      banner.textContent = message ?? "";
      banner.style.display = message ? "block" : "none";
    },
    setOverlay(rgba, width, height) {
      overlayCtx.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
      if (rgba) {
        const pixels = new Uint8ClampedArray(rgba);
        overlayCtx.putImageData(new ImageData(pixels, width, height), 0, 0);
      }
    },
  };

  const viewer = new Viewer(api, display);
  await viewer.onHover(meta.width >> 1, meta.height >> 1);

  overlayCanvas.addEventListener("mousemove", (ev) => {
    const rect = overlayCanvas.getBoundingClientRect();
    const x = Math.floor(((ev.clientX - rect.left) / rect.width) * meta.width);
    const y = Math.floor(((ev.clientY - rect.top) / rect.height) * meta.height);
    if (x >= 0 && y >= 0 && x < meta.width && y < meta.height) {
      void viewer.onHover(x, y);
    }
  });
  el<HTMLButtonElement>("toggle-overlay").addEventListener("click", () => {
    void viewer.toggleOverlay();
  });
}

start().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = String(err);
    (banner as HTMLElement).style.display = "block";
  }
});
