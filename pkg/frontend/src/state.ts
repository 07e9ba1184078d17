/** View state for one browser session: the framing draft, the selected and
 * pinned solutions, and the pending what-if edit. All mutations are pure
 * helpers over plain data so they are trivially testable. */

import type {
  AssetDoc,
  FramingDoc,
  OverheadVector,
  SolutionDoc,
  WhatIfResponse,
} from "./types.js";

export interface FramingDraft {
  assets: AssetDoc[];
  attacker: { expertise: string; effort_budget: number | null };
  budgets: OverheadVector | null;
}

export interface ViewState {
  activeSession: string | null;
  framing: FramingDoc | null;
  draft: FramingDraft | null;
  selectedSolution: string | null;
  /** pending what-if edit: per-part sequences on a copy of the selection */
  edit: Record<string, string[]> | null;
  editResult: WhatIfResponse | null;
  /** baseline pinned for comparisons and for hide/plan */
  pinned: SolutionDoc | null;
  comparisonPins: string[];
  selectedPath: number | null;
}

export function initialState(): ViewState {
  return {
    activeSession: null,
    framing: null,
    draft: null,
    selectedSolution: null,
    edit: null,
    editResult: null,
    pinned: null,
    comparisonPins: [],
    selectedPath: null,
  };
}

export function draftFromFraming(framing: FramingDoc): FramingDraft {
  return {
    assets: framing.assets.map((a) => ({ ...a, requirements: [...a.requirements] })),
    attacker: { ...framing.attacker },
    budgets: framing.budgets === null ? null : { ...framing.budgets },
  };
}

export function draftPayload(draft: FramingDraft): unknown {
  return {
    assets: draft.assets,
    attacker: draft.attacker,
    budgets: draft.budgets,
  };
}

export function addAssetToDraft(draft: FramingDraft, part: string): FramingDraft {
  if (draft.assets.some((a) => a.part === part)) {
    return draft;
  }
  return {
    ...draft,
    assets: [
      ...draft.assets,
      { part, requirements: ["confidentiality"], weight: 1.0, role: "primary" },
    ],
  };
}

export function removeAssetFromDraft(draft: FramingDraft, index: number): FramingDraft {
  return { ...draft, assets: draft.assets.filter((_, i) => i !== index) };
}

// -- what-if edit helpers -----------------------------------------------------

export function editFromSolution(solution: SolutionDoc): Record<string, string[]> {
  const out: Record<string, string[]> = {};
  for (const [part, seq] of Object.entries(solution.sequences)) {
    out[part] = [...seq];
  }
  return out;
}

export function addPi(edit: Record<string, string[]>, part: string, pi: string): Record<string, string[]> {
  const next = { ...edit, [part]: [...(edit[part] ?? []), pi] };
  return next;
}

export function removePi(edit: Record<string, string[]>, part: string, index: number): Record<string, string[]> {
  const seq = (edit[part] ?? []).filter((_, i) => i !== index);
  const next = { ...edit };
  if (seq.length > 0) {
    next[part] = seq;
  } else {
    delete next[part];
  }
  return next;
}

export function movePi(
  edit: Record<string, string[]>,
  part: string,
  index: number,
  direction: -1 | 1,
): Record<string, string[]> {
  const seq = [...(edit[part] ?? [])];
  const target = index + direction;
  if (index < 0 || index >= seq.length || target < 0 || target >= seq.length) {
    return edit;
  }
  [seq[index], seq[target]] = [seq[target], seq[index]];
  return { ...edit, [part]: seq };
}

/** Remove the last applied instance in global order (the deepest layer of
 * the lexicographically last part). */
export function removeLastPi(edit: Record<string, string[]>): Record<string, string[]> {
  const parts = Object.keys(edit).sort();
  if (parts.length === 0) {
    return edit;
  }
  const last = parts[parts.length - 1];
  return removePi(edit, last, edit[last].length - 1);
}

export function editEquals(a: Record<string, string[]>, b: Record<string, string[]>): boolean {
  const ka = Object.keys(a).sort();
  const kb = Object.keys(b).sort();
  if (ka.length !== kb.length) return false;
  return ka.every((k, i) => kb[i] === k && a[k].length === b[k].length && a[k].every((v, j) => b[k][j] === v));
}
