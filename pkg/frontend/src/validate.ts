/** Client-side framing validation, mirroring the ranges the engine
 * enforces. A draft failing these checks is never submitted. */

import { EXPERTISE_LEVELS, OVERHEAD_NAMES, REQUIREMENTS } from "./types.js";
import type { FramingDraft } from "./state.js";

export interface DraftIssue {
  field: string; // e.g. "asset:3:weight" or "attacker.expertise"
  message: string;
}

export function validateDraft(draft: FramingDraft): DraftIssue[] {
  const issues: DraftIssue[] = [];
  const seen = new Set<string>();
  draft.assets.forEach((asset, i) => {
    if (!asset.part) {
      issues.push({ field: `asset:${i}:part`, message: "asset needs a part" });
    }
    if (seen.has(asset.part)) {
      issues.push({ field: `asset:${i}:part`, message: `duplicate asset for part ${asset.part}` });
    }
    seen.add(asset.part);
    if (!(asset.weight > 0) || !Number.isFinite(asset.weight)) {
      issues.push({ field: `asset:${i}:weight`, message: "weight must be positive" });
    }
    if (asset.requirements.length === 0) {
      issues.push({ field: `asset:${i}:requirements`, message: "requirements must be non-empty" });
    }
    for (const req of asset.requirements) {
      if (!REQUIREMENTS.includes(req as never)) {
        issues.push({ field: `asset:${i}:requirements`, message: `unknown requirement ${req}` });
      }
    }
    if (asset.role !== "primary" && asset.role !== "secondary") {
      issues.push({ field: `asset:${i}:role`, message: `unknown role ${asset.role}` });
    }
  });
  if (!EXPERTISE_LEVELS.includes(draft.attacker.expertise as never)) {
    issues.push({ field: "attacker.expertise", message: `unknown expertise ${draft.attacker.expertise}` });
  }
  const effort = draft.attacker.effort_budget;
  if (effort !== null && (!Number.isInteger(effort) || effort <= 0)) {
    issues.push({ field: "attacker.effort_budget", message: "effort budget must be a positive integer" });
  }
  if (draft.budgets !== null) {
    for (const name of OVERHEAD_NAMES) {
      const value = draft.budgets[name];
      if (!(value >= 0) || !Number.isFinite(value)) {
        issues.push({ field: `budgets.${name}`, message: `${name} budget must be >= 0` });
      }
    }
  }
  return issues;
}
