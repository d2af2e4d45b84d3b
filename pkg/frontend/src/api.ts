/**
 * Typed client for the trial-conduct JSON API. Every number shown in the UI
 * comes from these responses; the client performs no dose-decision logic.
 */

export interface CellView {
  cell: [number, number];
  doses: [number, number];
  in_mask: boolean;
  n: number;
  dlt: number;
  rate: number | null;
  eliminated: boolean;
}

export interface DecisionView {
  action: string;
  next: [number, number] | null;
  candidates: [number, number][];
  tie_break: string;
  rng_draws_consumed: number;
}

export interface TrialView {
  trial_id: string;
  status: string;
  current: [number, number];
  recommendation: [number, number] | null;
  cohorts_used: number;
  max_cohorts: number;
  cohort_size: number;
  total_n: number;
  total_dlt: number;
  lambda_e: number;
  lambda_d: number;
  cells: CellView[];
  last_decision: DecisionView | null;
  decision?: DecisionView;
}

export interface SelectionView {
  selection: [number, number] | null;
  doses: [number, number] | null;
  estimates: Record<string, number>;
  status: string;
}

export interface WhatIfRow {
  dlt: number;
  total_n: number;
  total_dlt: number;
  action: string;
  next: [number, number] | null;
}

export interface WhatIfView {
  at: [number, number];
  cohort_size: number;
  rows: WhatIfRow[];
}

export interface DecisionTableRow {
  n: number;
  escalate_if_y_le: number;
  deescalate_if_y_ge: number;
  eliminate_if_y_ge: number | null;
}

export interface DecisionTableView {
  phi: number;
  lambda_e: number;
  lambda_d: number;
  epsilon: number;
  rows: DecisionTableRow[];
}

export interface NewTrialRequest {
  params: Record<string, unknown>;
  grid: { levels_a: number[]; levels_b: number[] };
  mask?: [number, number][];
  seed?: number;
}

export class ApiError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(
      (body as { code?: string }).code ?? "error",
      (body as { message?: string }).message ?? `request failed (${response.status})`,
      response.status,
    );
  }
  return body as T;
}

export class ConductApi {
  constructor(private baseUrl: string) {}

  createTrial(payload: NewTrialRequest): Promise<TrialView> {
    return request(`${this.baseUrl}/trials`, {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }

  getTrial(trialId: string): Promise<TrialView> {
    return request(`${this.baseUrl}/trials/${trialId}`);
  }

  postCohort(trialId: string, at: [number, number], dlt: number): Promise<TrialView> {
    return request(`${this.baseUrl}/trials/${trialId}/cohorts`, {
      method: "POST",
      body: JSON.stringify({ at, dlt }),
    });
  }

  getSelection(trialId: string): Promise<SelectionView> {
    return request(`${this.baseUrl}/trials/${trialId}/selection`);
  }

  getWhatIf(trialId: string): Promise<WhatIfView> {
    return request(`${this.baseUrl}/trials/${trialId}/what-if`);
  }

  getDecisionTable(trialId: string): Promise<DecisionTableView> {
    return request(`${this.baseUrl}/trials/${trialId}/decision-table`);
  }
}
