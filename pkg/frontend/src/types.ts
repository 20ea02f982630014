/** Shared data shapes: strokes on the client, runs and records on the wire. */

export type SeedLabel = "fg" | "bg";

export interface Point {
  x: number; // column, image space
  y: number; // row, image space
}

/** One brush stroke: a polyline stamped with a disk of the given radius. */
export interface Stroke {
  label: SeedLabel;
  radius: number;
  points: Point[];
}

/** A horizontal run of seeded pixels, the wire format for seeds. */
export interface SeedRun {
  label: SeedLabel;
  row: number;
  col: number;
  length: number;
}

export interface SessionCreated {
  session_id: string;
  width: number;
  height: number;
  revision: number;
  params: SessionParams;
}

export interface SessionParams {
  lam: number;
  sigma_c: number | null;
  bins: number;
  max_rounds: number;
}

export interface SeedCounts {
  fg: number;
  bg: number;
}

export interface SeedsOut {
  revision: number;
  seeds: SeedCounts;
}

export interface MaskInfo {
  revision: number;
  energy: number;
  rounds: number;
  foreground_pixels: number;
}

export interface SessionMeta {
  session_id: string;
  width: number;
  height: number;
  revision: number;
  params: SessionParams;
  seeds: SeedCounts;
  mask: MaskInfo | null;
}

export interface MaskRle {
  width: number;
  height: number;
  revision: number;
  energy: number;
  rounds: number;
  runs: Array<[number, number, number]>; // row, start col, length
}

export interface ClassifyResponse {
  label: number;
  class_name: string;
  classifier: "knn" | "pnn";
  nearest_distance: number | null;
  densities: Record<string, number> | null;
}
