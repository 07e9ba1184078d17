/** Rendering tests against real engine artifacts: every displayed number
 * must equal the artifact value (display parity), diagnostics must appear
 * verbatim, and ordering must mirror the report ranking. */

import { describe, expect, it } from "vitest";

import { fmtDelta, fmtIndex, fmtOverhead } from "../src/format.js";
import { draftFromFraming, editFromSolution } from "../src/state.js";
import { validateDraft } from "../src/validate.js";
import { renderFraming } from "../src/views/framing.js";
import { renderHiding } from "../src/views/hiding.js";
import { renderPaths } from "../src/views/paths.js";
import { renderWorkbench } from "../src/views/workbench.js";
import { OVERHEAD_NAMES } from "../src/types.js";
import type {
  FramingDoc,
  HiddenDoc,
  ReportDoc,
  SolutionsDoc,
  WhatIfResponse,
} from "../src/types.js";

import framingFixture from "./fixtures/framing.json";
import hiddenFixture from "./fixtures/hidden_solution.json";
import reportFixture from "./fixtures/risk_report.json";
import solutionsFixture from "./fixtures/solutions.json";
import whatifForbidden from "./fixtures/whatif_forbidden.json";
import whatifTop from "./fixtures/whatif_top.json";

const framing = framingFixture as unknown as FramingDoc;
const report = reportFixture as unknown as ReportDoc;
const solutions = solutionsFixture as unknown as SolutionsDoc;
const hidden = hiddenFixture as unknown as HiddenDoc;
const topWhatIf = whatifTop as unknown as WhatIfResponse;
const forbiddenWhatIf = whatifForbidden as unknown as WhatIfResponse;
const top = solutions.solutions[0];

describe("framing editor", () => {
  it("renders one row per asset", () => {
    const draft = draftFromFraming(framing);
    const html = renderFraming(framing, draft, [], []);
    for (const asset of framing.assets) {
      expect(html).toContain(`<code>${asset.part}</code>`);
    }
  });

  it("weight -1 shows an inline range error and disables saving", () => {
    const draft = draftFromFraming(framing);
    draft.assets[0].weight = -1;
    const issues = validateDraft(draft);
    expect(issues.length).toBeGreaterThan(0);
    const html = renderFraming(framing, draft, issues, []);
    expect(html).toContain('class="issue"');
    expect(html).toMatch(/weight must be positive/);
    expect(html).toMatch(/data-action="framing-save" disabled/);
  });

  it("server diagnostics are rendered inline", () => {
    const draft = draftFromFraming(framing);
    const html = renderFraming(framing, draft, [], [
      { severity: "error", entity: "crypt_kernel", message: "asset weight must be positive, got -1.0" },
    ]);
    expect(html).toContain("framing-diagnostics");
    expect(html).toContain("asset weight must be positive, got -1.0");
  });
});

describe("path explorer", () => {
  it("lists paths exactly in the report ranking with the report indices", () => {
    const html = renderPaths(report, false, null);
    let cursor = -1;
    for (const path of report.paths) {
      const needle = `<span class="num path-index">${fmtIndex(path.index)}</span>`;
      const at = html.indexOf(needle, cursor + 1);
      expect(at).toBeGreaterThan(cursor); // appears, and after the previous one
      cursor = at;
    }
    const indices = report.paths.map((p) => p.index);
    expect([...indices].sort((a, b) => b - a)).toEqual(indices);
  });

  it("step detail shows base and modified attributes within 1..5", () => {
    const html = renderPaths(report, false, 0);
    expect(html).toContain('id="step-detail"');
    for (const step of report.paths[0].steps) {
      for (const name of ["complexity", "required_skill", "tool_availability", "tool_usability"]) {
        expect(step.modified[name]).toBeGreaterThanOrEqual(1);
        expect(step.modified[name]).toBeLessThanOrEqual(5);
      }
    }
  });

  it("zero paths renders the empty state", () => {
    const empty = { ...report, paths: [] };
    const html = renderPaths(empty, false, null);
    expect(html).toContain("No feasible attack paths");
  });

  it("stale sessions show a banner", () => {
    expect(renderPaths(report, true, null)).toContain('id="stale-banner"');
    expect(renderPaths(report, false, null)).not.toContain('id="stale-banner"');
  });
});

describe("solution workbench", () => {
  const parts = framing.parts.map((p) => p.id);
  const pis = (framing as unknown as { catalog: { id: string }[] }).catalog.map((c) => c.id);

  it("what-if on the unchanged top solution shows the artifact values to all displayed digits", () => {
    const edit = editFromSolution(top);
    const html = renderWorkbench(solutions, top.id, edit, topWhatIf, top, parts, pis);
    expect(html).toContain(`<td class="num whatif-p">${fmtIndex(top.protection_index)}</td>`);
    expect(html).toContain(`<td class="num whatif-game">${fmtIndex(top.game_value!)}</td>`);
    for (const name of OVERHEAD_NAMES) {
      expect(html).toContain(`<td class="num" data-oh="${name}">${fmtOverhead(top.overhead[name])}</td>`);
    }
    // unchanged edit against the pinned top solution: zero deltas
    expect(html).toContain(`<td class="num delta-p">${fmtDelta(0)}</td>`);
    expect(html).toContain(`<td class="num delta-game">${fmtDelta(0)}</td>`);
  });

  it("a forbidden-pair edit flags the row with the engine diagnostic verbatim", () => {
    const edit = { crypt_kernel: ["virt_std", "cff_low"] };
    const html = renderWorkbench(solutions, top.id, edit, forbiddenWhatIf, top, parts, pis);
    expect(forbiddenWhatIf.valid).toBe(false);
    expect(html).toContain("forbidden pair (virt_std, cff_low)");
    expect(html).toMatch(/<tr class="invalid" data-edit-part="crypt_kernel">/);
    expect(html).toMatch(/data-action="edit-accept" disabled/);
  });

  it("solution rows carry the artifact values", () => {
    const html = renderWorkbench(solutions, null, null, null, null, parts, pis);
    for (const solution of solutions.solutions) {
      expect(html).toContain(`<td class="num sol-p">${fmtIndex(solution.protection_index)}</td>`);
      expect(html).toContain(`<td class="num sol-game">${fmtIndex(solution.game_value!)}</td>`);
    }
  });

  it("comparison pins render a side-by-side table with deltas", () => {
    const pins = solutions.solutions.slice(0, 2).map((s) => s.id);
    const html = renderWorkbench(solutions, null, null, null, null, parts, pis, pins);
    expect(html).toContain('id="comparison-table"');
    for (const id of pins) {
      expect(html).toContain(`data-compare-row="${id}"`);
    }
    const [a, b] = solutions.solutions;
    expect(html).toContain(fmtDelta(b.protection_index - a.protection_index));
    // unpinned render has no comparison table
    expect(renderWorkbench(solutions, null, null, null, null, parts, pis, [])).not.toContain(
      'id="comparison-table"',
    );
  });
});

describe("hiding review", () => {
  it("shows the confusion index, status and refined solution values", () => {
    const html = renderHiding(hidden, null);
    expect(html).toContain(`id="confusion">${fmtIndex(hidden.confusion_index)}</b>`);
    expect(html).toContain(hidden.status);
    expect(html).toContain(fmtIndex(hidden.solution.protection_index));
  });

  it("empty selection states that the base stayed unchanged", () => {
    const none = { ...hidden, selected: [] };
    expect(renderHiding(none, null)).toContain("base solution unchanged");
  });
});
