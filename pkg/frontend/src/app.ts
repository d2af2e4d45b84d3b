/**
 * The conduct dashboard: one live trial per tab. Every mutation round-trips
 * through the service; the DOM is re-rendered from service responses only.
 */

import { ApiError, ConductApi } from "./api.js";
import type { NewTrialRequest, SelectionView, TrialView, WhatIfView } from "./api.js";
import { buildGridViewModel } from "./view.js";
import type { GridCell, GridViewModel } from "./view.js";

const DEFAULT_TRIAL = {
  params: { phi: 0.3, epsilon: 0.9 },
  grid: { levels_a: [15, 25, 50, 75], levels_b: [120, 160, 200, 240] },
  mask: [
    [1, 1], [1, 2], [2, 2], [2, 3], [3, 2], [3, 3], [3, 4], [4, 4],
  ] as [number, number][],
};

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ConductApp {
  readonly api: ConductApi;
  private doc: Document;
  private root: HTMLElement;
  private trialId: string | null = null;
  private view: TrialView | null = null;
  private whatIf: WhatIfView | null = null;
  private selection: SelectionView | null = null;
  private error: string | null = null;
  private pending: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, baseUrl: string) {
    this.root = root;
    this.doc = root.ownerDocument;
    this.api = new ConductApi(baseUrl);
    this.renderSetup();
  }

  /** Settles once in-flight requests triggered by UI events are done. */
  whenIdle(): Promise<void> {
    return this.pending;
  }

  private track(work: Promise<void>): Promise<void> {
    this.pending = this.pending.then(() => work).catch(() => undefined);
    return work;
  }

  async createTrial(payload: NewTrialRequest = DEFAULT_TRIAL): Promise<void> {
    const view = await this.api.createTrial(payload);
    this.trialId = view.trial_id;
    await this.refresh(view);
  }

  async attachTrial(trialId: string): Promise<void> {
    this.trialId = trialId;
    await this.refresh();
  }

  async enterCohort(dlt: number): Promise<void> {
    if (!this.trialId || !this.view) throw new Error("no trial attached");
    const size = this.view.cohort_size;
    if (!Number.isInteger(dlt) || dlt < 0 || dlt > size) {
      this.error = `DLT count must be a whole number between 0 and ${size}`;
      this.render();
      return;
    }
    this.error = null;
    try {
      const view = await this.api.postCohort(this.trialId, this.view.current, dlt);
      await this.refresh(view);
    } catch (err) {
      this.error = err instanceof ApiError ? err.message : String(err);
      this.render();
    }
  }

  async refresh(view?: TrialView): Promise<void> {
    if (!this.trialId) return;
    this.view = view ?? (await this.api.getTrial(this.trialId));
    this.whatIf = null;
    this.selection = null;
    if (this.view.status === "running") {
      this.whatIf = await this.api.getWhatIf(this.trialId);
    } else if (this.view.status !== "stopped_safety") {
      this.selection = await this.api.getSelection(this.trialId);
    } else {
      this.selection = { selection: null, doses: null, estimates: {}, status: this.view.status };
    }
    this.render();
  }

  // rendering ---------------------------------------------------------------

  private renderSetup(): void {
    this.root.textContent = "";
    const panel = el(this.doc, "div", "setup-panel");
    panel.append(el(this.doc, "h1", undefined, "Combination escalation conduct"));
    const startButton = el(this.doc, "button", "primary", "Start trial (case-study setup)");
    startButton.id = "create-trial";
    startButton.addEventListener("click", () => {
      void this.track(this.createTrial());
    });
    const attachLabel = el(this.doc, "label", undefined, "or attach to trial id: ");
    const attachInput = el(this.doc, "input");
    attachInput.id = "attach-id";
    const attachButton = el(this.doc, "button", undefined, "Attach");
    attachButton.id = "attach-trial";
    attachButton.addEventListener("click", () => {
      if (attachInput.value.trim()) {
        void this.track(this.attachTrial(attachInput.value.trim()));
      }
    });
    attachLabel.append(attachInput, attachButton);
    panel.append(startButton, attachLabel);
    this.root.append(panel);
  }

  private render(): void {
    if (!this.view) return;
    const model = buildGridViewModel(this.view);
    this.root.textContent = "";
    const header = el(this.doc, "div", "header");
    header.append(
      el(this.doc, "h1", undefined, `Trial ${this.view.trial_id}`),
      el(
        this.doc,
        "p",
        "boundaries",
        `stay interval (${model.lambdaE.toFixed(4)}, ${model.lambdaD.toFixed(4)}] - ` +
          `cohorts ${model.cohortsUsed}/${model.maxCohorts} - ` +
          `patients ${model.totalN}, DLTs ${model.totalDlt}`,
      ),
    );
    this.root.append(header);
    if (model.stopBanner) {
      const banner = el(this.doc, "div", "stop-banner", model.stopBanner);
      banner.id = "stop-banner";
      this.root.append(banner);
    }
    if (this.error) {
      const issue = el(this.doc, "div", "error-banner", this.error);
      issue.id = "error-banner";
      this.root.append(issue);
    }
    this.root.append(this.renderGrid(model));
    if (model.running) {
      this.root.append(this.renderCohortForm(model), this.renderWhatIf());
    } else {
      this.root.append(this.renderSelection());
    }
  }

  private renderGrid(model: GridViewModel): HTMLElement {
    const table = el(this.doc, "table", "dose-grid");
    table.id = "dose-grid";
    const head = el(this.doc, "tr");
    head.append(el(this.doc, "th", undefined, "A \\ B (mg)"));
    for (const dose of model.levelsB) {
      head.append(el(this.doc, "th", undefined, String(dose)));
    }
    table.append(head);
    for (let i = 0; i < model.rows.length; i++) {
      const tr = el(this.doc, "tr");
      tr.append(el(this.doc, "th", undefined, String(model.levelsA[i])));
      for (const cell of model.rows[i]!) {
        tr.append(this.renderCell(cell));
      }
      table.append(tr);
    }
    return table;
  }

  private renderCell(cell: GridCell): HTMLElement {
    const td = el(this.doc, "td", `cell ${cell.status}`);
    td.id = `cell-${cell.cell[0]}-${cell.cell[1]}`;
    if (cell.status === "unmasked") {
      td.textContent = "-";
      return td;
    }
    td.append(el(this.doc, "div", "counts", `${cell.dlt}/${cell.n}`));
    td.append(
      el(this.doc, "div", "rate", cell.rate === null ? "untried" : cell.rate.toFixed(3)),
    );
    if (cell.status === "recommended") {
      td.append(el(this.doc, "div", "tag", "next cohort"));
    }
    if (cell.status === "eliminated") {
      td.append(el(this.doc, "div", "tag", "eliminated"));
    }
    return td;
  }

  private renderCohortForm(model: GridViewModel): HTMLElement {
    const form = el(this.doc, "div", "cohort-form");
    const rec = model.recommended!;
    form.append(
      el(
        this.doc,
        "h2",
        undefined,
        `Enter DLT count for the cohort at (${rec[0]}, ${rec[1]})`,
      ),
    );
    const input = el(this.doc, "input");
    input.id = "dlt-input";
    input.setAttribute("type", "number");
    input.setAttribute("min", "0");
    input.setAttribute("max", String(model.cohortSize));
    const submit = el(this.doc, "button", "primary", "Record cohort");
    submit.id = "submit-cohort";
    submit.addEventListener("click", () => {
      const raw = input.value.trim();
      void this.track(this.enterCohort(raw === "" ? Number.NaN : Number(raw)));
    });
    form.append(input, submit);
    return form;
  }

  private renderWhatIf(): HTMLElement {
    const panel = el(this.doc, "div", "what-if");
    panel.id = "what-if";
    panel.append(el(this.doc, "h2", undefined, "If the next cohort shows ... the design will"));
    const table = el(this.doc, "table");
    const head = el(this.doc, "tr");
    for (const title of ["DLTs in cohort", "totals at dose", "action", "next combination"]) {
      head.append(el(this.doc, "th", undefined, title));
    }
    table.append(head);
    for (const row of this.whatIf?.rows ?? []) {
      const tr = el(this.doc, "tr", "what-if-row");
      tr.append(
        el(this.doc, "td", undefined, String(row.dlt)),
        el(this.doc, "td", undefined, `${row.total_dlt}/${row.total_n}`),
        el(this.doc, "td", undefined, row.action),
        el(this.doc, "td", undefined, row.next ? `(${row.next[0]}, ${row.next[1]})` : "-"),
      );
      table.append(tr);
    }
    panel.append(table);
    return panel;
  }

  private renderSelection(): HTMLElement {
    const panel = el(this.doc, "div", "selection");
    panel.id = "selection";
    const sel = this.selection;
    if (!sel || sel.selection === null) {
      panel.append(
        el(this.doc, "h2", undefined, "No combination selected"),
        el(this.doc, "p", undefined, "The trial ended without a safe recommendation."),
      );
      return panel;
    }
    panel.append(
      el(
        this.doc,
        "h2",
        undefined,
        `Selected combination: (${sel.doses![0]} mg, ${sel.doses![1]} mg)`,
      ),
      el(this.doc, "p", undefined, `grid position (${sel.selection[0]}, ${sel.selection[1]})`),
    );
    const list = el(this.doc, "ul", "estimates");
    for (const [cell, estimate] of Object.entries(sel.estimates)) {
      list.append(el(this.doc, "li", undefined, `(${cell}): ${estimate.toFixed(4)}`));
    }
    panel.append(list);
    return panel;
  }
}

export function mountApp(root: HTMLElement, baseUrl: string): ConductApp {
  return new ConductApp(root, baseUrl);
}

declare global {
  interface Window {
    __CONDUCT_NO_AUTOMOUNT__?: boolean;
    conductApp?: ConductApp;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  if (!window.__CONDUCT_NO_AUTOMOUNT__) {
    const mount = () => {
      const root = document.getElementById("app");
      if (root) {
        const base = root.dataset.serviceUrl ?? "";
        window.conductApp = mountApp(root, base);
      }
    };
    if (document.readyState === "loading") {
      document.addEventListener("DOMContentLoaded", mount);
    } else {
      mount();
    }
  }
}
