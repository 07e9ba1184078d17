/** Solution workbench: ranked solutions, a what-if editor over a copy of
 * the selected solution, and deltas against the pinned baseline. All
 * indices and overheads are engine values, formatted but never
 * recomputed. */

import { esc, fmtDelta, fmtIndex, overheadCells } from "../format.js";
import type { DiagnosticDoc, SolutionDoc, SolutionsDoc, WhatIfResponse } from "../types.js";
import { OVERHEAD_NAMES } from "../types.js";

function solutionRow(solution: SolutionDoc, selected: boolean, pinnedId: string | null, compared: boolean): string {
  const marks = [selected ? "selected" : "", pinnedId === solution.id ? "pinned" : ""].join(" ");
  return `
    <tr class="${marks}" data-action="select-solution" data-id="${esc(solution.id)}">
      <td><code>${esc(solution.id)}</code>${pinnedId === solution.id ? " 📌" : ""}</td>
      <td class="num sol-p">${fmtIndex(solution.protection_index)}</td>
      <td class="num sol-game">${fmtIndex(solution.game_value ?? null)}</td>
      <td class="num">${solution.applied.length}</td>
      ${overheadCells(solution.overhead)}
      <td><button data-action="compare-toggle" data-id="${esc(solution.id)}">${compared ? "unpin" : "compare"}</button></td>
    </tr>`;
}

function comparisonTable(solutions: SolutionsDoc, pins: string[]): string {
  const picked = solutions.solutions.filter((s) => pins.includes(s.id));
  if (picked.length === 0) {
    return "";
  }
  const baseline = picked[0];
  const rows = picked
    .map(
      (s, i) => `
      <tr data-compare-row="${esc(s.id)}">
        <td><code>${esc(s.id)}</code>${i === 0 ? " (baseline)" : ""}</td>
        <td class="num">${fmtIndex(s.protection_index)}</td>
        <td class="num">${i === 0 ? "" : fmtDelta(s.protection_index - baseline.protection_index)}</td>
        <td class="num">${fmtIndex(s.game_value ?? null)}</td>
        <td class="num">${i === 0 || s.game_value === undefined || baseline.game_value === undefined ? "" : fmtDelta(s.game_value - baseline.game_value)}</td>
        ${overheadCells(s.overhead)}
      </tr>`,
    )
    .join("");
  return `
    <h3>Comparison pins</h3>
    <table class="grid" id="comparison-table">
      <thead><tr><th>id</th><th>P</th><th>ΔP</th><th>game</th><th>Δgame</th>
      ${OVERHEAD_NAMES.map((n) => `<th>${n}</th>`).join("")}</tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

function diagnosticsFor(diags: DiagnosticDoc[], part: string): DiagnosticDoc[] {
  return diags.filter((d) => d.entity === part || d.entity.split(",").includes(part));
}

function editRows(
  edit: Record<string, string[]>,
  diagnostics: DiagnosticDoc[],
  partOptions: string[],
  piOptions: string[],
): string {
  const parts = Object.keys(edit).sort();
  const rows = parts
    .map((part) => {
      const flagged = diagnosticsFor(diagnostics, part);
      const chips = edit[part]
        .map(
          (pi, i) => `
          <span class="chip">
            ${i + 1}. <code>${esc(pi)}</code>
            <button data-action="edit-move" data-part="${esc(part)}" data-index="${i}" data-dir="-1" title="earlier">↑</button>
            <button data-action="edit-move" data-part="${esc(part)}" data-index="${i}" data-dir="1" title="later">↓</button>
            <button data-action="edit-remove" data-part="${esc(part)}" data-index="${i}" title="remove">✕</button>
          </span>`,
        )
        .join(" ");
      return `
      <tr class="${flagged.some((d) => d.severity === "error") ? "invalid" : ""}" data-edit-part="${esc(part)}">
        <td><code>${esc(part)}</code></td>
        <td>${chips}</td>
        <td class="diag-cell">${flagged.map((d) => `<span class="diag-${d.severity}">${esc(d.message)}</span>`).join(" ")}</td>
      </tr>`;
    })
    .join("");
  const partSelect = partOptions.map((p) => `<option value="${esc(p)}">${esc(p)}</option>`).join("");
  const piSelect = piOptions.map((p) => `<option value="${esc(p)}">${esc(p)}</option>`).join("");
  return `${rows}
    <tr>
      <td><select id="edit-part">${partSelect}</select></td>
      <td>
        <select id="edit-pi">${piSelect}</select>
        <button data-action="edit-add">add instance</button>
      </td>
      <td></td>
    </tr>`;
}

function whatIfPanel(result: WhatIfResponse | null, baseline: SolutionDoc | null): string {
  if (result === null) {
    return `<p class="muted">Submit the edit to evaluate it.</p>`;
  }
  const unattached = result.diagnostics.filter((d) => d.severity === "error");
  const deltas =
    baseline && result.protection_index !== null && result.game_value !== null && result.overhead
      ? `
      <tr>
        <th>Δ vs pinned</th>
        <td class="num delta-p">${fmtDelta(result.protection_index - baseline.protection_index)}</td>
        <td class="num delta-game">${fmtDelta(result.game_value - (baseline.game_value ?? 0))}</td>
        ${OVERHEAD_NAMES.map(
          (name) => `<td class="num">${fmtDelta(result.overhead![name] - baseline.overhead[name])}</td>`,
        ).join("")}
      </tr>`
      : "";
  return `
    <div id="whatif-result" class="${result.valid ? "valid" : "invalid"}">
      <p>
        ${result.valid ? "✓ valid" : `✗ invalid (${unattached.length} problem(s))`}
      </p>
      <table class="grid">
        <thead><tr><th></th><th>P</th><th>game value</th>${OVERHEAD_NAMES.map((n) => `<th>${n}</th>`).join("")}</tr></thead>
        <tbody>
          <tr>
            <th>what-if</th>
            <td class="num whatif-p">${fmtIndex(result.protection_index)}</td>
            <td class="num whatif-game">${fmtIndex(result.game_value)}</td>
            ${result.overhead ? overheadCells(result.overhead) : `<td colspan="5">—</td>`}
          </tr>
          ${
            baseline
              ? `<tr>
                  <th>pinned</th>
                  <td class="num pinned-p">${fmtIndex(baseline.protection_index)}</td>
                  <td class="num pinned-game">${fmtIndex(baseline.game_value ?? null)}</td>
                  ${overheadCells(baseline.overhead)}
                 </tr>`
              : ""
          }
          ${deltas}
        </tbody>
      </table>
      <p>
        <button data-action="edit-accept" ${result.valid ? "" : "disabled"}>accept edit (pin for hide/plan)</button>
      </p>
    </div>`;
}

export function renderWorkbench(
  solutions: SolutionsDoc | null,
  selected: string | null,
  edit: Record<string, string[]> | null,
  editResult: WhatIfResponse | null,
  pinned: SolutionDoc | null,
  parts: string[],
  pis: string[],
  comparisonPins: string[] = [],
): string {
  if (solutions === null) {
    return `<section id="workbench"><h2>Solutions</h2>
      <p class="empty">No mitigation results yet; run the mitigation stage first.</p></section>`;
  }
  const rows = solutions.solutions
    .map((s) => solutionRow(s, s.id === selected, pinned?.id ?? null, comparisonPins.includes(s.id)))
    .join("");
  const editor =
    edit === null
      ? `<p class="muted">Select a solution to edit a copy of it.</p>`
      : `
      <table class="grid" id="edit-table">
        <thead><tr><th>part</th><th>sequence (layer order)</th><th>diagnostics</th></tr></thead>
        <tbody>${editRows(edit, editResult?.diagnostics ?? [], parts, pis)}</tbody>
      </table>
      <p>
        <button data-action="edit-submit">evaluate what-if</button>
        <button data-action="edit-reset">reset to selection</button>
        <button data-action="edit-remove-last">remove last instance</button>
      </p>
      ${whatIfPanel(editResult, pinned)}`;
  return `
  <section id="workbench">
    <h2>Solutions (ranked by game value)</h2>
    <p class="muted">
      ${solutions.candidates_played} candidates played, effort ${solutions.effort},
      layer limit ${solutions.lmax}${solutions.budgets ? "" : ", no budgets"}
    </p>
    <table class="grid" id="solutions-table">
      <thead>
        <tr><th>id</th><th>P</th><th>game value</th><th>applied</th>
        ${OVERHEAD_NAMES.map((n) => `<th>${n}</th>`).join("")}<th></th></tr>
      </thead>
      <tbody>${rows}</tbody>
    </table>
    ${comparisonTable(solutions, comparisonPins)}
    <h3>What-if workbench</h3>
    ${editor}
  </section>`;
}
