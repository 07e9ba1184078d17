/** Path explorer: ranked attack paths as indented step lists, with base vs
 * modified attributes for a selected step. Order and every number mirror
 * risk_report.json exactly. */

import { esc, fmtIndex } from "../format.js";
import type { ReportDoc } from "../types.js";

const ATTRS = ["complexity", "required_skill", "tool_availability", "tool_usability"];

export function renderPaths(report: ReportDoc | null, stale: boolean, selected: number | null): string {
  if (report === null) {
    return `<section id="paths"><h2>Attack paths</h2>
      <p class="empty">No assessment yet; run the assessment stage first.</p></section>`;
  }
  const banner = stale
    ? `<div class="banner" id="stale-banner">The framing data changed after this assessment
       (knowledge-base hash differs); reassess to refresh.</div>`
    : "";
  if (report.paths.length === 0) {
    return `<section id="paths"><h2>Attack paths</h2>${banner}
      <p class="empty">No feasible attack paths for this attacker.</p></section>`;
  }
  const rows = report.paths
    .map((path, i) => {
      const steps = path.steps
        .map(
          (step, j) => `
          <li class="step" data-action="select-step" data-path="${i}" data-step="${j}">
            <code>${esc(step.rule)}</code> @ <code>${esc(step.target)}</code>
            <span class="num">${fmtIndex(step.index)}</span>
          </li>`,
        )
        .join("");
      const detail =
        selected === i
          ? `<table class="grid attrs" id="step-detail">
              <thead><tr><th>step</th>${ATTRS.map((a) => `<th>${a}</th>`).join("")}<th>index</th></tr></thead>
              <tbody>${path.steps
                .map(
                  (step) => `
                 <tr>
                   <td><code>${esc(step.rule)}</code></td>
                   ${ATTRS.map(
                     (a) =>
                       `<td class="num">${step.base[a]}${
                         step.modified[a] !== step.base[a] ? ` → <b>${step.modified[a]}</b>` : ""
                       }</td>`,
                   ).join("")}
                   <td class="num">${fmtIndex(step.index)}</td>
                 </tr>`,
                )
                .join("")}</tbody>
             </table>`
          : "";
      return `
      <li class="path ${selected === i ? "selected" : ""}" data-rank="${i + 1}">
        <div class="path-head" data-action="select-path" data-path="${i}">
          <b>#${i + 1}</b> <code>${esc(path.asset)}</code> / ${esc(path.requirement)},
          index <span class="num path-index">${fmtIndex(path.index)}</span> (${path.depth} steps)
        </div>
        <ol class="steps">${steps}</ol>
        ${detail}
      </li>`;
    })
    .join("");
  return `
  <section id="paths">
    <h2>Attack paths</h2>
    ${banner}
    <p>
      Application risk <b class="num">${fmtIndex(report.application_risk)}</b>,
      attacker ${esc(report.attacker.expertise)} (effort ${report.attacker.effort_budget}),
      aggregator ${esc(report.aggregator)}
    </p>
    <ol class="paths">${rows}</ol>
  </section>`;
}
