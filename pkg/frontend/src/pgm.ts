/** Minimal binary PGM (P5) reader for the service's preview endpoint. */

export interface GrayImage {
  width: number;
  height: number;
  data: Uint8Array;
}

export function parsePgm(buffer: ArrayBuffer): GrayImage {
  const bytes = new Uint8Array(buffer);
  if (bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error("not a binary PGM (P5)");
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    // skip whitespace and comment lines
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let value = 0;
    const start = pos;
    while (pos < bytes.length && bytes[pos] >= 0x30 && bytes[pos] <= 0x39) {
      value = value * 10 + (bytes[pos] - 0x30);
      pos++;
    }
    if (pos === start) throw new Error("bad PGM header");
    fields.push(value);
  }
  pos++; // single whitespace byte before the raster
  const [width, height, maxval] = fields;
  if (maxval > 255) throw new Error("16-bit PGM not supported");
  const need = width * height;
  if (bytes.length - pos < need) throw new Error("truncated PGM raster");
  return { width, height, data: bytes.slice(pos, pos + need) };
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
}

/**
 * Overlay pixels from the normalized preview: unmeasurable pixels
 * (intensity 0) turn red, everything else is its grayscale value; the
 * whole layer carries 50% alpha for blending over the frame.
 */
export function previewToOverlayRgba(img: GrayImage): Uint8ClampedArray {
  const out = new Uint8ClampedArray(img.width * img.height * 4);
  for (let i = 0; i < img.data.length; i++) {
    const v = img.data[i];
    const o = i * 4;
    if (v === 0) {
      out[o] = 255;
      out[o + 1] = 0;
      out[o + 2] = 0;
    } else {
      out[o] = v;
      out[o + 1] = v;
      out[o + 2] = v;
    }
    out[o + 3] = 128;
  }
  return out;
}
