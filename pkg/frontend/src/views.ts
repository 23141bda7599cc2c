/**
 * Presentation math for the query views. No geodesy or map projection
 * happens here: pixel placements come from the server; the radar only
 * turns server-provided (distance, bearing) pairs into plot coordinates.
 */

import type { RadarEntryBody, SmartTownEntry, TrailBody } from "./types.js";

/** SVG polyline `points` attribute from server-provided pixel placements. */
export function polylinePoints(view: NonNullable<TrailBody["view"]>): string {
  return view.pixels.map((p) => `${p.x},${p.y}`).join(" ");
}

export interface PolarPoint {
  x: number;
  y: number;
  entry: RadarEntryBody;
}

/**
 * Place radar entries on a polar plot: bearing as angle (0 deg straight
 * up, clockwise), distance as radius scaled so the farthest entry sits on
 * the outer ring.
 */
export function radarPlot(
  entries: RadarEntryBody[],
  center: number,
  outerRadius: number,
): PolarPoint[] {
  const maxDistance = Math.max(1e-9, ...entries.map((e) => e.distance_m));
  return entries.map((entry) => {
    const r = (entry.distance_m / maxDistance) * outerRadius;
    const theta = (entry.bearing_deg * Math.PI) / 180;
    return {
      x: center + r * Math.sin(theta),
      y: center - r * Math.cos(theta),
      entry,
    };
  });
}

export interface SmartTownPage {
  entry: SmartTownEntry;
  prevIndex: number | null;
  nextIndex: number | null;
}

/** Linked pages in rank order; prev/next resolved to list indices. */
export function smartTownPages(entries: SmartTownEntry[]): SmartTownPage[] {
  const indexById = new Map(entries.map((e, i) => [e.id, i]));
  return entries.map((entry) => ({
    entry,
    prevIndex: entry.prev !== null ? indexById.get(entry.prev) ?? null : null,
    nextIndex: entry.next !== null ? indexById.get(entry.next) ?? null : null,
  }));
}

export function formatDistance(meters: number): string {
  return meters >= 1000 ? `${(meters / 1000).toFixed(2)} km` : `${meters.toFixed(0)} m`;
}
