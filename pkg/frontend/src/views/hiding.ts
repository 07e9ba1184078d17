/** Asset-hiding review: the refinement picked by the 0-1 model, grouped by
 * strategy, with the resulting solution's engine-computed numbers. */

import { esc, fmtIndex, overheadCells } from "../format.js";
import type { HiddenDoc } from "../types.js";
import { OVERHEAD_NAMES } from "../types.js";

const KIND_LABELS: Record<string, string> = {
  replicate: "fingerprint replication",
  enlarge: "fingerprint enlargement",
  shadow: "fingerprint shadowing",
};

export function renderHiding(hidden: HiddenDoc | null, pinnedId: string | null): string {
  if (hidden === null) {
    return `<section id="hiding"><h2>Asset hiding</h2>
      <p class="empty">No hiding refinement yet; run the hiding stage first.</p></section>`;
  }
  const groups: Record<string, string[]> = {};
  for (const v of hidden.selected) {
    const label = KIND_LABELS[v.kind] ?? v.kind;
    const text =
      v.kind === "enlarge"
        ? `<code>${esc(v.pi)}</code> extends from <code>${esc(v.part)}</code> to <code>${esc(v.extends_to)}</code>`
        : v.kind === "replicate"
          ? `<code>${esc(v.pi)}</code> → <code>${esc(v.part)}</code> (replica ${v.replica})`
          : `<code>${esc(v.pi)}</code> atop <code>${esc(v.part)}</code>`;
    (groups[label] ??= []).push(`<li>${text}</li>`);
  }
  const groupHtml = Object.entries(groups)
    .map(([label, items]) => `<h4>${label}</h4><ul>${items.join("")}</ul>`)
    .join("");
  const sol = hidden.solution;
  return `
  <section id="hiding">
    <h2>Asset hiding</h2>
    <p>
      Base solution <code>${esc(hidden.base)}</code>, Γ=${hidden.gamma},
      confusion index <b class="num" id="confusion">${fmtIndex(hidden.confusion_index)}</b>
      (<span class="${hidden.status}">${hidden.status}</span>)
    </p>
    ${hidden.selected.length ? groupHtml : `<p class="empty">The model kept the base solution unchanged.</p>`}
    <h3>Refined solution <code>${esc(sol.id)}</code>${pinnedId === sol.id ? " 📌" : ""}</h3>
    <table class="grid">
      <thead><tr><th>P</th><th>game value</th>${OVERHEAD_NAMES.map((n) => `<th>${n}</th>`).join("")}</tr></thead>
      <tbody><tr>
        <td class="num">${fmtIndex(sol.protection_index)}</td>
        <td class="num">${fmtIndex(sol.game_value ?? null)}</td>
        ${overheadCells(sol.overhead)}
      </tr></tbody>
    </table>
    <p><button data-action="hidden-accept">accept refinement (pin for plan)</button></p>
  </section>`;
}
