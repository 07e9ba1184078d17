/** Framing editor: assets, attacker, budgets. Drafts are validated
 * client-side with the engine's ranges before any request is sent; engine
 * re-validation diagnostics come back inline. */

import { esc, fmtWeight } from "../format.js";
import type { FramingDraft } from "../state.js";
import type { DraftIssue } from "../validate.js";
import { EXPERTISE_LEVELS, OVERHEAD_NAMES, REQUIREMENTS, type FramingDoc, type DiagnosticDoc } from "../types.js";

function issueFor(issues: DraftIssue[], field: string): string {
  const hits = issues.filter((i) => i.field === field);
  if (hits.length === 0) return "";
  return `<span class="issue">${hits.map((h) => esc(h.message)).join("; ")}</span>`;
}

export function renderFraming(
  framing: FramingDoc,
  draft: FramingDraft,
  issues: DraftIssue[],
  serverDiagnostics: DiagnosticDoc[],
): string {
  const assetRows = draft.assets
    .map((asset, i) => {
      const reqBoxes = REQUIREMENTS.map(
        (req) => `
          <label><input type="checkbox" data-action="asset-req" data-index="${i}" data-req="${req}"
            ${asset.requirements.includes(req) ? "checked" : ""}> ${req}</label>`,
      ).join(" ");
      return `
        <tr data-asset-row="${i}">
          <td><code>${esc(asset.part)}</code></td>
          <td>${reqBoxes} ${issueFor(issues, `asset:${i}:requirements`)}</td>
          <td><input type="number" step="0.1" value="${fmtWeight(asset.weight)}"
               data-action="asset-weight" data-index="${i}"> ${issueFor(issues, `asset:${i}:weight`)}</td>
          <td>
            <select data-action="asset-role" data-index="${i}">
              <option value="primary" ${asset.role === "primary" ? "selected" : ""}>primary</option>
              <option value="secondary" ${asset.role === "secondary" ? "selected" : ""}>secondary</option>
            </select>
          </td>
          <td><button data-action="asset-remove" data-index="${i}">remove</button></td>
        </tr>`;
    })
    .join("");

  const assetParts = new Set(draft.assets.map((a) => a.part));
  const addOptions = framing.parts
    .filter((p) => !assetParts.has(p.id))
    .map((p) => `<option value="${esc(p.id)}">${esc(p.id)} (${esc(p.kind)})</option>`)
    .join("");

  const expertiseOptions = EXPERTISE_LEVELS.map(
    (level) => `<option value="${level}" ${draft.attacker.expertise === level ? "selected" : ""}>${level}</option>`,
  ).join("");

  const budgetInputs =
    draft.budgets === null
      ? `<p class="muted">No budgets set in the knowledge base.</p>`
      : OVERHEAD_NAMES.map(
          (name) => `
          <label class="budget">${name}
            <input type="number" step="0.5" value="${draft.budgets![name]}" data-action="budget" data-name="${name}">
            ${issueFor(issues, `budgets.${name}`)}
          </label>`,
        ).join("");

  const serverBox = serverDiagnostics.length
    ? `<div class="diagnostics" id="framing-diagnostics">${serverDiagnostics
        .map((d) => `<p class="diag-${d.severity}">${esc(d.entity)}: ${esc(d.message)}</p>`)
        .join("")}</div>`
    : "";

  return `
  <section id="framing">
    <h2>Risk framing</h2>
    ${serverBox}
    <table class="grid">
      <thead><tr><th>part</th><th>requirements</th><th>weight</th><th>role</th><th></th></tr></thead>
      <tbody>${assetRows}</tbody>
    </table>
    <p>
      <select id="add-asset-part">${addOptions}</select>
      <button data-action="asset-add">add asset</button>
    </p>
    <h3>Attacker</h3>
    <p>
      expertise
      <select data-action="attacker-expertise">${expertiseOptions}</select>
      ${issueFor(issues, "attacker.expertise")}
      effort budget
      <input type="number" data-action="attacker-effort"
             value="${draft.attacker.effort_budget ?? ""}" placeholder="assets">
      ${issueFor(issues, "attacker.effort_budget")}
    </p>
    <h3>Overhead budgets (% of baseline)</h3>
    <div class="budgets">${budgetInputs}</div>
    <p>
      <button data-action="framing-save" ${issues.length ? "disabled" : ""}>save framing</button>
      <button data-action="reassess">reassess</button>
      ${issues.length ? `<span class="issue">fix ${issues.length} problem(s) before saving</span>` : ""}
    </p>
  </section>`;
}
