/** Session chooser and pipeline controls. */

import { esc, shortHash } from "../format.js";
import type { SessionSummary } from "../types.js";

const STAGES = ["framing", "assessment", "mitigation", "hiding"];

export function renderSessions(sessions: SessionSummary[], active: string | null): string {
  const rows = sessions
    .map(
      (s) => `
      <tr class="${s.id === active ? "selected" : ""}" data-action="open-session" data-id="${esc(s.id)}">
        <td><code>${esc(s.id)}</code></td>
        <td><code>${shortHash(s.session)}…</code></td>
        ${STAGES.map((st) => `<td class="stage-${esc(s.stages[st] ?? "none")}">${esc(s.stages[st] ?? "—")}</td>`).join("")}
      </tr>`,
    )
    .join("");
  return `
  <section id="sessions">
    <h2>Sessions</h2>
    <table class="grid">
      <thead><tr><th>id</th><th>hash</th>${STAGES.map((s) => `<th>${s}</th>`).join("")}</tr></thead>
      <tbody>${rows || `<tr><td colspan="6" class="empty">none yet</td></tr>`}</tbody>
    </table>
    <p>
      KB <input type="file" id="upload-kb" accept=".json">
      model <input type="file" id="upload-model" accept=".json">
      <button data-action="create-session">create session</button>
    </p>
    <p>
      <button data-action="run-assess">assess</button>
      <button data-action="run-mitigate">mitigate</button>
      <button data-action="run-hide">hide</button>
      <button data-action="get-plan">deployment plan (pinned)</button>
    </p>
    <pre id="plan-output" class="muted"></pre>
  </section>`;
}
