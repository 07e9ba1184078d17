/** Live parity against the real engine: spawns `esp serve`, drives the UI
 * layers (api client, state helpers, view renderers) through the documented
 * endpoints, and compares against the engine's own artifacts and CLI runs.
 * Skipped when the esp CLI is not on PATH. */

import { execFileSync, spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { fmtDelta, fmtIndex, fmtOverhead } from "../src/format.js";
import { draftFromFraming, draftPayload, editFromSolution, removeLastPi } from "../src/state.js";
import { renderWorkbench } from "../src/views/workbench.js";
import { OVERHEAD_NAMES } from "../src/types.js";
import type { FramingDoc, SolutionsDoc } from "../src/types.js";

const PORT = 8543;
const BASE = `http://127.0.0.1:${PORT}`;

function espAvailable(): boolean {
  return spawnSync("esp", ["--help"], { stdio: "ignore" }).status === 0;
}

const available = espAvailable();
const liveDescribe = available ? describe : describe.skip;

let server: ChildProcess | null = null;
let work = "";
let api: ApiClient;

function py(code: string, cwd: string): string {
  return execFileSync("python3", ["-c", code], { cwd, encoding: "utf-8" });
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const response = await fetch(`${BASE}/api/sessions`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("esp serve did not come up");
}

liveDescribe("live engine parity", () => {
  beforeAll(async () => {
    work = mkdtempSync(join(tmpdir(), "esp-ui-"));
    py(
      `
from esp.demo import write_demo_sources, demo_kb
from esp.model import save_kb
from esp.ingest import scan_sources
from esp.model import app_to_doc
from esp.canonical import write_canonical
write_demo_sources("src")
save_kb("kb8.json", demo_kb(8))
save_kb("kb4.json", demo_kb(4))
write_canonical("model.json", app_to_doc(scan_sources("src")))
`,
      work,
    );
    server = spawn("esp", ["serve", "--root", join(work, "sessions"), "--port", String(PORT)], {
      stdio: "ignore",
    });
    api = new ApiClient(BASE);
    await waitForServer();
  });

  afterAll(() => {
    server?.kill();
  });

  it("workbench what-if on the top solution matches solutions.json to all displayed digits", async () => {
    const kb = JSON.parse(readFileSync(join(work, "kb8.json"), "utf-8"));
    const model = JSON.parse(readFileSync(join(work, "model.json"), "utf-8"));
    const { id } = await api.createSession(kb, model);
    await api.assess(id);
    const solutions: SolutionsDoc = await api.mitigate(id, { top: 5 });
    const top = solutions.solutions[0];

    const framing = await api.getFraming(id);
    const parts = framing.parts.map((p) => p.id);
    const pis = (framing as unknown as { catalog: { id: string }[] }).catalog.map((c) => c.id);

    // the workbench evaluates an unchanged copy of the top solution
    const edit = editFromSolution(top);
    const result = await api.whatIf(id, edit);
    expect(result.valid).toBe(true);

    const html = renderWorkbench(solutions, top.id, edit, result, top, parts, pis);
    expect(html).toContain(`<td class="num whatif-p">${fmtIndex(top.protection_index)}</td>`);
    expect(html).toContain(`<td class="num whatif-game">${fmtIndex(top.game_value!)}</td>`);
    for (const name of OVERHEAD_NAMES) {
      expect(html).toContain(`<td class="num" data-oh="${name}">${fmtOverhead(top.overhead[name])}</td>`);
    }
    expect(html).toContain(`<td class="num delta-p">${fmtDelta(0)}</td>`);

    // forbidden-pair edit surfaces the engine diagnostic verbatim
    const clash = await api.whatIf(id, { crypt_kernel: ["virt_std", "cff_low"] });
    expect(clash.valid).toBe(false);
    const message = clash.diagnostics.find((d) => d.severity === "error")?.message;
    expect(message).toBe("forbidden pair (virt_std, cff_low)");
    const flagged = renderWorkbench(
      solutions,
      top.id,
      { crypt_kernel: ["virt_std", "cff_low"] },
      clash,
      top,
      parts,
      pis,
    );
    expect(flagged).toContain(message);
    expect(flagged).toMatch(/<tr class="invalid" data-edit-part="crypt_kernel">/);
  });

  it("removing the last applied instance never raises the protection index", async () => {
    const kb = JSON.parse(readFileSync(join(work, "kb8.json"), "utf-8"));
    const model = JSON.parse(readFileSync(join(work, "model.json"), "utf-8"));
    const { id } = await api.createSession(kb, model);
    await api.assess(id);
    const solutions = await api.mitigate(id, { top: 3 });
    const top = solutions.solutions[0];

    let reduced = removeLastPi(editFromSolution(top));
    let result = await api.whatIf(id, reduced);
    // the engine recomputes P either way; it must not rise when protection is removed
    expect(result.protection_index!).toBeLessThanOrEqual(top.protection_index + 1e-12);

    if (!result.valid) {
      // correlated parts must carry identical sequences: the diagnostic names
      // them, so repair the edit the way the workbench user would
      const diag = result.diagnostics.find((d) => d.message.includes("correlated"));
      expect(diag).toBeDefined();
      const members = diag!.entity.split(",");
      const shortest = members
        .map((part) => reduced[part] ?? [])
        .reduce((a, b) => (b.length < a.length ? b : a));
      for (const part of members) {
        if (shortest.length > 0) {
          reduced = { ...reduced, [part]: [...shortest] };
        } else {
          const { [part]: _gone, ...rest } = reduced;
          reduced = rest;
        }
      }
      result = await api.whatIf(id, reduced);
    }
    expect(result.valid).toBe(true);
    expect(result.protection_index!).toBeLessThanOrEqual(top.protection_index + 1e-12);
  });

  it("framing round-trip: expertise edits change the gated path count exactly as CLI runs do", async () => {
    // CLI ground truth: professional vs geek KBs on the same sources
    const cliCounts: Record<string, number> = {};
    for (const [label, kbFile] of [
      ["professional", "kb4.json"],
      ["geek", "kb4_geek.json"],
    ] as const) {
      if (label === "geek") {
        py(
          `
import json
doc = json.load(open("kb4.json"))
doc["attacker"]["expertise"] = "geek"
import esp.canonical as c
c.write_canonical("kb4_geek.json", doc)
`,
          work,
        );
      }
      const sessionDir = join(work, `cli-${label}`);
      execFileSync("esp", ["analyze", "--src", join(work, "src"), "--kb", join(work, kbFile), "--out", sessionDir]);
      const out = execFileSync("esp", ["assess", "--session", sessionDir, "--json"], { encoding: "utf-8" });
      cliCounts[label] = (JSON.parse(out) as { paths: unknown[] }).paths.length;
    }
    expect(cliCounts.geek).toBeLessThan(cliCounts.professional); // skill gating bites

    // UI flow: one session, framing edit through the draft machinery
    const kb = JSON.parse(readFileSync(join(work, "kb4.json"), "utf-8"));
    const model = JSON.parse(readFileSync(join(work, "model.json"), "utf-8"));
    const { id } = await api.createSession(kb, model);
    const first = await api.assess(id);
    expect(first.paths.length).toBe(cliCounts.professional);

    const framing: FramingDoc = await api.getFraming(id);
    const draft = draftFromFraming(framing);
    draft.attacker.expertise = "geek";
    await api.putFraming(id, draftPayload(draft));
    const regated = await api.assess(id);
    expect(regated.paths.length).toBe(cliCounts.geek);

    // and back: restoring the expertise restores the count
    const restore = draftFromFraming(await api.getFraming(id));
    restore.attacker.expertise = "professional";
    await api.putFraming(id, draftPayload(restore));
    const again = await api.assess(id);
    expect(again.paths.length).toBe(cliCounts.professional);
  });
});
