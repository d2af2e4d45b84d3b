/**
 * Pure view-model construction: reshape a service trial view into what the
 * grid component renders. Mirrors the service state exactly; no decisions
 * are made here.
 */

import type { CellView, TrialView } from "./api.js";

export type CellStatus =
  | "unmasked"
  | "untried"
  | "treated"
  | "active"
  | "recommended"
  | "eliminated";

export interface GridCell {
  cell: [number, number];
  doses: [number, number];
  status: CellStatus;
  n: number;
  dlt: number;
  rate: number | null;
}

export interface GridViewModel {
  rows: GridCell[][];
  levelsA: number[];
  levelsB: number[];
  lambdaE: number;
  lambdaD: number;
  running: boolean;
  stopBanner: string | null;
  recommended: [number, number] | null;
  cohortsUsed: number;
  maxCohorts: number;
  cohortSize: number;
  totalN: number;
  totalDlt: number;
}

const STOP_MESSAGES: Record<string, string> = {
  stopped_safety:
    "Trial stopped for safety: the starting combination was eliminated.",
  stopped_converged:
    "Trial stopped: enough patients at the current combination with toxicity in the stay interval.",
  stopped_max_n: "Trial stopped: cohort budget exhausted.",
};

function sameCell(a: [number, number] | null, b: [number, number]): boolean {
  return a !== null && a[0] === b[0] && a[1] === b[1];
}

function cellStatus(cell: CellView, view: TrialView): CellStatus {
  if (!cell.in_mask) return "unmasked";
  if (cell.eliminated) return "eliminated";
  const running = view.status === "running";
  if (running && sameCell(view.recommendation, cell.cell)) return "recommended";
  if (running && sameCell(view.current, cell.cell) && cell.n > 0) return "active";
  if (cell.n > 0) return "treated";
  return "untried";
}

export function buildGridViewModel(view: TrialView): GridViewModel {
  const byCell = new Map(view.cells.map((c) => [`${c.cell[0]},${c.cell[1]}`, c]));
  const maxI = Math.max(...view.cells.map((c) => c.cell[0]));
  const maxJ = Math.max(...view.cells.map((c) => c.cell[1]));
  const levelsA: number[] = [];
  const levelsB: number[] = [];
  const rows: GridCell[][] = [];
  for (let i = 1; i <= maxI; i++) {
    const row: GridCell[] = [];
    for (let j = 1; j <= maxJ; j++) {
      const cell = byCell.get(`${i},${j}`);
      if (!cell) throw new Error(`service view missing cell (${i},${j})`);
      if (i === 1) levelsB.push(cell.doses[1]);
      if (j === 1) levelsA.push(cell.doses[0]);
      row.push({
        cell: cell.cell,
        doses: cell.doses,
        status: cellStatus(cell, view),
        n: cell.n,
        dlt: cell.dlt,
        rate: cell.rate,
      });
    }
    rows.push(row);
  }
  const model: GridViewModel = {
    rows,
    levelsA,
    levelsB,
    lambdaE: view.lambda_e,
    lambdaD: view.lambda_d,
    running: view.status === "running",
    stopBanner: view.status === "running" ? null : STOP_MESSAGES[view.status] ?? view.status,
    recommended: view.status === "running" ? view.recommendation : null,
    cohortsUsed: view.cohorts_used,
    maxCohorts: view.max_cohorts,
    cohortSize: view.cohort_size,
    totalN: view.total_n,
    totalDlt: view.total_dlt,
  };
  assertRecommendationUnique(model);
  return model;
}

function assertRecommendationUnique(model: GridViewModel): void {
  const recommended = model.rows.flat().filter((c) => c.status === "recommended");
  if (model.running && recommended.length !== 1) {
    throw new Error(
      `expected exactly one recommended cell while running, found ${recommended.length}`,
    );
  }
  if (!model.running && recommended.length !== 0) {
    throw new Error("stopped trial must not highlight a recommendation");
  }
}
