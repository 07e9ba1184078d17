import { describe, expect, it } from "vitest";

import type { FramingDraft } from "../src/state.js";
import { validateDraft } from "../src/validate.js";

function draft(overrides: Partial<FramingDraft> = {}): FramingDraft {
  return {
    assets: [{ part: "crypt_kernel", requirements: ["confidentiality"], weight: 2.5, role: "primary" }],
    attacker: { expertise: "professional", effort_budget: 2 },
    budgets: {
      client_time: 11,
      server_time: 4,
      client_memory: 16,
      server_memory: 6,
      network_traffic: 8,
    },
    ...overrides,
  };
}

describe("framing draft validation (same ranges as the engine)", () => {
  it("accepts a valid draft", () => {
    expect(validateDraft(draft())).toEqual([]);
  });

  it("rejects a non-positive weight and names the field", () => {
    const d = draft();
    d.assets[0].weight = -1;
    const issues = validateDraft(d);
    expect(issues).toHaveLength(1);
    expect(issues[0].field).toBe("asset:0:weight");
    expect(issues[0].message).toMatch(/positive/);
  });

  it("rejects empty requirements", () => {
    const d = draft();
    d.assets[0].requirements = [];
    expect(validateDraft(d).map((i) => i.field)).toContain("asset:0:requirements");
  });

  it("rejects unknown expertise", () => {
    const d = draft();
    d.attacker.expertise = "wizard";
    expect(validateDraft(d).map((i) => i.field)).toContain("attacker.expertise");
  });

  it("rejects non-positive effort budgets but allows null", () => {
    const d = draft();
    d.attacker.effort_budget = 0;
    expect(validateDraft(d).map((i) => i.field)).toContain("attacker.effort_budget");
    d.attacker.effort_budget = null;
    expect(validateDraft(d)).toEqual([]);
  });

  it("rejects negative budget components", () => {
    const d = draft();
    d.budgets!.client_time = -5;
    expect(validateDraft(d).map((i) => i.field)).toContain("budgets.client_time");
  });

  it("rejects duplicate asset parts", () => {
    const d = draft();
    d.assets.push({ ...d.assets[0] });
    expect(validateDraft(d).some((i) => i.message.includes("duplicate"))).toBe(true);
  });
});
