/** View state, the segment round-trip, and the zoom/pan transform math. */
import { ApiError } from "./api.js";
import { hasBothSeedClasses, rasterizeStrokes } from "./rasterize.js";
import type { MaskInfo, MaskRle, SeedRun, SeedsOut, Stroke } from "./types.js";

export interface ViewState {
  sessionId: string;
  width: number;
  height: number;
  zoom: number;
  panX: number;
  panY: number;
  overlayOpacity: number;
  revision: number;
  maskRevision: number | null;
  energy: number | null;
  rounds: number | null;
  busy: boolean;
}

export function initialViewState(sessionId: string, width: number, height: number,
                                 revision: number): ViewState {
  return {
    sessionId, width, height,
    zoom: 1, panX: 0, panY: 0,
    overlayOpacity: 0.45,
    revision, maskRevision: null, energy: null, rounds: null,
    busy: false,
  };
}

export function imageToScreen(state: Pick<ViewState, "zoom" | "panX" | "panY">,
                              x: number, y: number): { x: number; y: number } {
  return { x: x * state.zoom + state.panX, y: y * state.zoom + state.panY };
}

export function screenToImage(state: Pick<ViewState, "zoom" | "panX" | "panY">,
                              x: number, y: number): { x: number; y: number } {
  return { x: (x - state.panX) / state.zoom, y: (y - state.panY) / state.zoom };
}

/** Zoom by `factor` keeping the screen point (cx, cy) fixed. */
export function zoomAround(state: ViewState, factor: number,
                           cx: number, cy: number): ViewState {
  const zoom = Math.min(64, Math.max(0.125, state.zoom * factor));
  const applied = zoom / state.zoom;
  return {
    ...state,
    zoom,
    panX: cx - (cx - state.panX) * applied,
    panY: cy - (cy - state.panY) * applied,
  };
}

/** The minimal slice of the API client the segment round-trip needs. */
export interface SegmentClient {
  sendSeeds(sessionId: string, runs: SeedRun[],
            mode?: "replace" | "merge"): Promise<SeedsOut>;
  segment(sessionId: string, expectedRevision?: number): Promise<MaskInfo>;
  maskRle(sessionId: string): Promise<MaskRle>;
}

export interface SegmentOutcome {
  info: MaskInfo;
  rle: MaskRle;
  revision: number;
  retried: boolean;
}

/** Send the strokes' rasterization, trigger the cut, fetch the mask.
 *
 * The caller must hold at least one stroke of each class (the UI disables
 * the control otherwise; this guards regardless). A stale-revision conflict
 * is retried exactly once with freshly sent seeds.
 */
export async function segmentWithStrokes(client: SegmentClient, sessionId: string,
                                         strokes: readonly Stroke[],
                                         width: number, height: number):
    Promise<SegmentOutcome> {
  if (!hasBothSeedClasses(strokes, width, height)) {
    throw new Error("need at least one foreground and one background scribble");
  }
  const runs = rasterizeStrokes(strokes, width, height);
  let seeds = await client.sendSeeds(sessionId, runs, "replace");
  let retried = false;
  let info: MaskInfo;
  try {
    info = await client.segment(sessionId, seeds.revision);
  } catch (error) {
    if (!(error instanceof ApiError) || error.status !== 409) throw error;
    retried = true;
    seeds = await client.sendSeeds(sessionId, runs, "replace");
    info = await client.segment(sessionId, seeds.revision);
  }
  const rle = await client.maskRle(sessionId);
  return { info, rle, revision: info.revision, retried };
}
