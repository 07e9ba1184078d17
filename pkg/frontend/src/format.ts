/** Formatting helpers. Every number shown in the UI comes from an engine
 * artifact and goes through exactly one of these formatters, so parity with
 * the artifacts holds to all displayed digits. */

import { OVERHEAD_NAMES, type OverheadVector } from "./types.js";

export function esc(text: unknown): string {
  return String(text)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Risk/protection indices and game values: four decimals. */
export function fmtIndex(value: number | null | undefined): string {
  return value === null || value === undefined ? "—" : value.toFixed(4);
}

/** Overhead percentages: two decimals. */
export function fmtOverhead(value: number): string {
  return value.toFixed(2);
}

export function fmtWeight(value: number): string {
  return String(value);
}

/** Signed delta against a baseline, four decimals. */
export function fmtDelta(value: number): string {
  const text = Math.abs(value).toFixed(4);
  if (value > 0) return `+${text}`;
  if (value < 0) return `−${text}`;
  return "±0.0000";
}

export function overheadCells(overhead: OverheadVector): string {
  return OVERHEAD_NAMES.map((name) => `<td class="num" data-oh="${name}">${fmtOverhead(overhead[name])}</td>`).join("");
}

export function shortHash(hash: string): string {
  return hash.slice(0, 12);
}
