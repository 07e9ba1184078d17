/** Engine artifact shapes consumed by the UI (never recomputed here). */

export type Requirement = "confidentiality" | "integrity";
export type Expertise = "geek" | "amateur" | "professional" | "guru";

export const EXPERTISE_LEVELS: Expertise[] = ["geek", "amateur", "professional", "guru"];
export const REQUIREMENTS: Requirement[] = ["confidentiality", "integrity"];
export const OVERHEAD_NAMES = [
  "client_time",
  "server_time",
  "client_memory",
  "server_memory",
  "network_traffic",
] as const;
export type OverheadName = (typeof OVERHEAD_NAMES)[number];

export type OverheadVector = Record<OverheadName, number>;

export interface AssetDoc {
  part: string;
  requirements: string[];
  weight: number;
  role: "primary" | "secondary";
}

export interface PartDoc {
  id: string;
  kind: string;
  name: string;
}

export interface FramingDoc {
  session: string;
  assets: AssetDoc[];
  attacker: { expertise: string; effort_budget: number | null };
  budgets: OverheadVector | null;
  parts: PartDoc[];
}

export interface AttackStepDoc {
  rule: string;
  binding: Record<string, string>;
}

export interface AttackPathDoc {
  asset: string;
  requirement: string;
  depth: number;
  steps: AttackStepDoc[];
}

export interface AttacksDoc {
  session: string;
  attacker: { expertise: string; effort_budget: number };
  total_inferred: number;
  gated_out: number;
  paths: AttackPathDoc[];
}

export interface ReportStepDoc {
  rule: string;
  target: string;
  binding: Record<string, string>;
  base: Record<string, number>;
  modified: Record<string, number>;
  index: number;
}

export interface ReportPathDoc {
  asset: string;
  requirement: string;
  index: number;
  depth: number;
  steps: ReportStepDoc[];
}

export interface ReportDoc {
  session: string;
  aggregator: string;
  attacker: { expertise: string; effort_budget: number };
  application_risk: number;
  assets: { part: string; role: string; weight: number; requirements: string[]; risk: number }[];
  paths: ReportPathDoc[];
}

export interface AppliedPiDoc {
  pi: string;
  part: string;
  layer: number;
}

export interface SolutionDoc {
  id: string;
  applied: AppliedPiDoc[];
  sequences: Record<string, string[]>;
  predicted_metrics: Record<string, Record<string, number>>;
  overhead: OverheadVector;
  protection_index: number;
  discouraged_penalty: number;
  game_value?: number;
  enlargements: { part: string; extends_to: string; pi: string }[];
}

export interface SolutionsDoc {
  session: string;
  budgets: OverheadVector | null;
  lmax: number;
  effort: number;
  beam: number;
  candidates_played: number;
  solutions: SolutionDoc[];
}

export interface DiagnosticDoc {
  severity: "error" | "warning";
  entity: string;
  message: string;
}

export interface WhatIfResponse {
  valid: boolean;
  diagnostics: DiagnosticDoc[];
  protection_index: number | null;
  game_value: number | null;
  overhead: OverheadVector | null;
  predicted_metrics?: Record<string, Record<string, number>>;
  solution?: SolutionDoc;
}

export interface HiddenDoc {
  session: string;
  base: string;
  gamma: number;
  confusion_index: number;
  status: "optimal" | "suboptimal";
  selected: { name: string; kind: string; pi: string; part: string; replica: number; extends_to: string }[];
  solution: SolutionDoc;
}

export interface SessionSummary {
  id: string;
  session: string;
  stages: Record<string, string>;
}

export interface ApiError {
  code: string;
  stage: string | null;
  message: string;
  refs: string[];
  diagnostics?: DiagnosticDoc[];
}
