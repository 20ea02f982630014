/** Mask decoding and overlay pixel composition (pure, canvas-free). */
import type { MaskRle } from "./types.js";

export function maskFromRuns(runs: ReadonlyArray<readonly [number, number, number]>,
                             width: number, height: number): Uint8Array {
  const mask = new Uint8Array(width * height);
  for (const [row, start, length] of runs) {
    if (row < 0 || row >= height || start < 0 || start + length > width) {
      throw new Error(`mask run (${row}, ${start}, ${length}) outside ${width}x${height}`);
    }
    mask.fill(1, row * width + start, row * width + start + length);
  }
  return mask;
}

export interface OverlayStyle {
  color: readonly [number, number, number];
  opacity: number; // 0..1, applied to foreground pixels only
}

export const DEFAULT_OVERLAY: OverlayStyle = { color: [64, 160, 255], opacity: 0.45 };

/** RGBA buffer tinting foreground pixels; background pixels stay transparent. */
export function composeOverlay(mask: Uint8Array, width: number, height: number,
                               style: OverlayStyle = DEFAULT_OVERLAY):
    Uint8ClampedArray<ArrayBuffer> {
  if (mask.length !== width * height) {
    throw new Error(`mask length ${mask.length} does not match ${width}x${height}`);
  }
  const alpha = Math.round(Math.max(0, Math.min(1, style.opacity)) * 255);
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i]) {
      rgba[i * 4] = style.color[0];
      rgba[i * 4 + 1] = style.color[1];
      rgba[i * 4 + 2] = style.color[2];
      rgba[i * 4 + 3] = alpha;
    }
  }
  return rgba;
}

export function overlayFromRle(rle: MaskRle,
                               style: OverlayStyle = DEFAULT_OVERLAY):
    Uint8ClampedArray<ArrayBuffer> {
  return composeOverlay(maskFromRuns(rle.runs, rle.width, rle.height),
                        rle.width, rle.height, style);
}
