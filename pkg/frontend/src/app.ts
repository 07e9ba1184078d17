/** Single-page app wiring: state, API calls, rendering, event delegation.
 * Session state is only ever changed through the documented endpoints. */

import { ApiClient, EngineError } from "./api.js";
import { esc } from "./format.js";
import {
  addAssetToDraft,
  addPi,
  draftFromFraming,
  draftPayload,
  editFromSolution,
  initialState,
  movePi,
  removeAssetFromDraft,
  removeLastPi,
  removePi,
  type ViewState,
} from "./state.js";
import { validateDraft } from "./validate.js";
import { renderFraming } from "./views/framing.js";
import { renderHiding } from "./views/hiding.js";
import { renderPaths } from "./views/paths.js";
import { renderSessions } from "./views/sessions.js";
import { renderWorkbench } from "./views/workbench.js";
import type {
  AttacksDoc,
  DiagnosticDoc,
  HiddenDoc,
  ReportDoc,
  SessionSummary,
  SolutionsDoc,
} from "./types.js";

interface Docs {
  sessions: SessionSummary[];
  attacks: AttacksDoc | null;
  report: ReportDoc | null;
  solutions: SolutionsDoc | null;
  hidden: HiddenDoc | null;
}

export class App {
  state: ViewState = initialState();
  docs: Docs = { sessions: [], attacks: null, report: null, solutions: null, hidden: null };
  serverDiagnostics: DiagnosticDoc[] = [];
  notice = "";

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {}

  async start(): Promise<void> {
    this.root.addEventListener("click", (event) => this.onClick(event));
    this.root.addEventListener("change", (event) => this.onChange(event));
    await this.refreshSessions();
    this.render();
  }

  // -- data loading ---------------------------------------------------------

  async refreshSessions(): Promise<void> {
    this.docs.sessions = await this.api.listSessions();
  }

  async openSession(id: string): Promise<void> {
    this.state = { ...initialState(), activeSession: id };
    this.docs.attacks = null;
    this.docs.report = null;
    this.docs.solutions = null;
    this.docs.hidden = null;
    this.state.framing = await this.api.getFraming(id);
    this.state.draft = draftFromFraming(this.state.framing);
    await this.tryLoadArtifacts(id);
  }

  private async tryLoadArtifacts(id: string): Promise<void> {
    try {
      const { attacks, report } = await this.api.getAttacks(id);
      this.docs.attacks = attacks;
      this.docs.report = report;
    } catch {
      /* stage not run yet */
    }
    try {
      this.docs.solutions = await this.api.getSolutions(id);
    } catch {
      /* stage not run yet */
    }
  }

  get stale(): boolean {
    return (
      this.state.framing !== null &&
      this.docs.attacks !== null &&
      this.docs.attacks.session !== this.state.framing.session
    );
  }

  // -- rendering --------------------------------------------------------------

  render(): void {
    const issues = this.state.draft ? validateDraft(this.state.draft) : [];
    const parts = this.state.framing?.parts.map((p) => p.id) ?? [];
    const catalog = (this.state.framing as unknown as { catalog?: { id: string }[] })?.catalog ?? [];
    const pis = catalog.map((c) => c.id);
    this.root.innerHTML = `
      <header><h1>software protection workbench</h1>
        ${this.notice ? `<div class="banner" id="notice">${esc(this.notice)}</div>` : ""}
      </header>
      ${renderSessions(this.docs.sessions, this.state.activeSession)}
      ${
        this.state.framing && this.state.draft
          ? renderFraming(this.state.framing, this.state.draft, issues, this.serverDiagnostics)
          : ""
      }
      ${this.state.activeSession ? renderPaths(this.docs.report, this.stale, this.state.selectedPath) : ""}
      ${
        this.state.activeSession
          ? renderWorkbench(
              this.docs.solutions,
              this.state.selectedSolution,
              this.state.edit,
              this.state.editResult,
              this.state.pinned,
              parts,
              pis,
              this.state.comparisonPins,
            )
          : ""
      }
      ${this.state.activeSession ? renderHiding(this.docs.hidden, this.state.pinned?.id ?? null) : ""}
    `;
  }

  // -- event handling -----------------------------------------------------------

  private dataset(event: Event): DOMStringMap | null {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    return target ? target.dataset : null;
  }

  async onClick(event: Event): Promise<void> {
    const data = this.dataset(event);
    if (!data?.action) return;
    try {
      await this.dispatch(data, event);
    } catch (error) {
      this.notice = error instanceof EngineError ? `engine: ${error.message}` : String(error);
    }
    this.render();
  }

  onChange(event: Event): void {
    const input = event.target as HTMLInputElement | HTMLSelectElement;
    const action = input.dataset.action;
    if (!action || !this.state.draft) return;
    const draft = this.state.draft;
    const index = Number(input.dataset.index ?? -1);
    switch (action) {
      case "asset-weight":
        draft.assets[index].weight = Number(input.value);
        break;
      case "asset-role":
        draft.assets[index].role = input.value as "primary" | "secondary";
        break;
      case "asset-req": {
        const req = input.dataset.req!;
        const asset = draft.assets[index];
        const checked = (input as HTMLInputElement).checked;
        asset.requirements = checked
          ? [...new Set([...asset.requirements, req])].sort()
          : asset.requirements.filter((r) => r !== req);
        break;
      }
      case "attacker-expertise":
        draft.attacker.expertise = input.value;
        break;
      case "attacker-effort":
        draft.attacker.effort_budget = input.value === "" ? null : Number(input.value);
        break;
      case "budget":
        if (draft.budgets) {
          draft.budgets[input.dataset.name as keyof typeof draft.budgets] = Number(input.value);
        }
        break;
      default:
        return;
    }
    this.render();
  }

  private async dispatch(data: DOMStringMap, event: Event): Promise<void> {
    const id = this.state.activeSession;
    this.notice = "";
    switch (data.action) {
      case "open-session":
        await this.openSession(data.id!);
        break;
      case "create-session": {
        const kbFile = (document.getElementById("upload-kb") as HTMLInputElement)?.files?.[0];
        const modelFile = (document.getElementById("upload-model") as HTMLInputElement)?.files?.[0];
        if (!kbFile || !modelFile) {
          this.notice = "choose a KB file and a model file first";
          return;
        }
        const kb = JSON.parse(await kbFile.text());
        const model = JSON.parse(await modelFile.text());
        const created = await this.api.createSession(kb, model);
        await this.refreshSessions();
        await this.openSession(created.id);
        break;
      }
      case "asset-add": {
        const select = document.getElementById("add-asset-part") as HTMLSelectElement | null;
        if (select?.value && this.state.draft) {
          this.state.draft = addAssetToDraft(this.state.draft, select.value);
        }
        break;
      }
      case "asset-remove":
        if (this.state.draft) {
          this.state.draft = removeAssetFromDraft(this.state.draft, Number(data.index));
        }
        break;
      case "framing-save": {
        if (!id || !this.state.draft) return;
        if (validateDraft(this.state.draft).length > 0) return; // invalid drafts never leave the client
        try {
          this.state.framing = await this.api.putFraming(id, draftPayload(this.state.draft));
          this.state.draft = draftFromFraming(this.state.framing);
          this.serverDiagnostics = [];
          await this.refreshSessions();
        } catch (error) {
          if (error instanceof EngineError && error.body.diagnostics) {
            this.serverDiagnostics = error.body.diagnostics as DiagnosticDoc[];
            return; // draft preserved, diagnostics rendered inline
          }
          throw error;
        }
        break;
      }
      case "reassess":
      case "run-assess": {
        if (!id) return;
        await this.api.assess(id);
        const { attacks, report } = await this.api.getAttacks(id);
        this.docs.attacks = attacks;
        this.docs.report = report;
        await this.refreshSessions();
        break;
      }
      case "run-mitigate":
        if (!id) return;
        this.docs.solutions = await this.api.mitigate(id);
        await this.refreshSessions();
        break;
      case "run-hide": {
        if (!id) return;
        let options: { solution?: string; solution_doc?: unknown } = {};
        const pinned = this.state.pinned;
        if (pinned) {
          const ranked = this.docs.solutions?.solutions.some((s) => s.id === pinned.id);
          options = ranked ? { solution: pinned.id } : { solution_doc: pinned };
        }
        this.docs.hidden = await this.api.hide(id, options);
        await this.refreshSessions();
        break;
      }
      case "get-plan": {
        if (!id) return;
        const solutionId = this.state.pinned?.id ?? "top";
        const plan = await this.api.getPlan(id, solutionId);
        const pre = document.getElementById("plan-output");
        this.notice = `plan ${plan.plan_hash.slice(0, 12)} with ${plan.directives.length} directives`;
        if (pre) pre.textContent = JSON.stringify(plan, null, 2);
        break;
      }
      case "select-path":
        this.state.selectedPath = this.state.selectedPath === Number(data.path) ? null : Number(data.path);
        break;
      case "select-step":
        this.state.selectedPath = Number(data.path);
        event.stopPropagation?.();
        break;
      case "select-solution": {
        const solution = this.docs.solutions?.solutions.find((s) => s.id === data.id);
        if (solution) {
          this.state.selectedSolution = solution.id;
          this.state.edit = editFromSolution(solution);
          this.state.editResult = null;
          if (this.state.pinned === null) {
            this.state.pinned = solution; // first selection pins the baseline
          }
        }
        break;
      }
      case "edit-add": {
        const part = (document.getElementById("edit-part") as HTMLSelectElement)?.value;
        const pi = (document.getElementById("edit-pi") as HTMLSelectElement)?.value;
        if (part && pi && this.state.edit) {
          this.state.edit = addPi(this.state.edit, part, pi);
        }
        break;
      }
      case "edit-remove":
        if (this.state.edit) {
          this.state.edit = removePi(this.state.edit, data.part!, Number(data.index));
        }
        break;
      case "edit-move":
        if (this.state.edit) {
          this.state.edit = movePi(this.state.edit, data.part!, Number(data.index), Number(data.dir) as -1 | 1);
        }
        break;
      case "edit-remove-last":
        if (this.state.edit) {
          this.state.edit = removeLastPi(this.state.edit);
        }
        break;
      case "edit-reset": {
        const solution = this.docs.solutions?.solutions.find((s) => s.id === this.state.selectedSolution);
        this.state.edit = solution ? editFromSolution(solution) : null;
        this.state.editResult = null;
        break;
      }
      case "edit-submit":
        if (id && this.state.edit) {
          this.state.editResult = await this.api.whatIf(id, this.state.edit);
        }
        break;
      case "edit-accept":
        if (this.state.editResult?.valid && this.state.editResult.solution) {
          this.state.pinned = this.state.editResult.solution;
        }
        break;
      case "compare-toggle": {
        const pins = this.state.comparisonPins;
        this.state.comparisonPins = pins.includes(data.id!)
          ? pins.filter((p) => p !== data.id)
          : [...pins, data.id!];
        break;
      }
      case "hidden-accept":
        if (this.docs.hidden) {
          this.state.pinned = this.docs.hidden.solution;
        }
        break;
    }
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (root) {
    new App(root, new ApiClient("")).start();
  }
}

boot();
