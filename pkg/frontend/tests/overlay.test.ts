import { describe, expect, it } from "vitest";

import { composeOverlay, maskFromRuns, overlayFromRle } from "../src/overlay.js";

describe("maskFromRuns", () => {
  it("paints runs into a dense mask", () => {
    const mask = maskFromRuns([[0, 1, 2], [2, 0, 4]], 4, 3);
    expect(Array.from(mask)).toEqual([
      0, 1, 1, 0,
      0, 0, 0, 0,
      1, 1, 1, 1,
    ]);
  });

  it("rejects runs outside the grid", () => {
    expect(() => maskFromRuns([[3, 0, 1]], 4, 3)).toThrow(/outside/);
    expect(() => maskFromRuns([[0, 2, 3]], 4, 3)).toThrow(/outside/);
  });
});

describe("composeOverlay", () => {
  it("tints foreground pixels and leaves background transparent", () => {
    const mask = Uint8Array.from([1, 0, 0, 1]);
    const rgba = composeOverlay(mask, 2, 2, { color: [10, 20, 30], opacity: 0.5 });
    expect(Array.from(rgba.slice(0, 4))).toEqual([10, 20, 30, 128]);
    expect(Array.from(rgba.slice(4, 8))).toEqual([0, 0, 0, 0]);
    expect(Array.from(rgba.slice(12, 16))).toEqual([10, 20, 30, 128]);
  });

  it("clamps opacity into [0, 1]", () => {
    const mask = Uint8Array.from([1]);
    expect(composeOverlay(mask, 1, 1, { color: [1, 2, 3], opacity: 7 })[3]).toBe(255);
    expect(composeOverlay(mask, 1, 1, { color: [1, 2, 3], opacity: -1 })[3]).toBe(0);
  });

  it("rejects a mask/size mismatch", () => {
    expect(() => composeOverlay(new Uint8Array(3), 2, 2)).toThrow(/match/);
  });
});

describe("overlayFromRle", () => {
  it("decodes a whole RLE payload", () => {
    const rgba = overlayFromRle({
      width: 3, height: 2, revision: 5, energy: 1.5, rounds: 2,
      runs: [[1, 0, 3]],
    });
    expect(rgba.length).toBe(24);
    expect(rgba[3]).toBe(0); // row 0 transparent
    expect(rgba[3 + 12]).toBeGreaterThan(0); // row 1 tinted
  });
});
