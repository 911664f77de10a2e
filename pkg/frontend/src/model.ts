/**
 * Pure view-model: everything the panels display, derived from API payloads
 * only. Rendering server-confirmed state and nothing else is what makes a
 * reload reconstruct the identical view.
 */

import type { PlanJson, ReportJson, SceneJson, SessionStatus } from "./api.js";

export interface ActionBadge {
  index: number;
  kind: string;
  label: string;
  executed: boolean;
  error: string | null;
}

export interface SessionView {
  sessionId: string;
  state: SessionStatus["state"];
  busy: boolean;
  instanceCount: number;
  hasTerrain: boolean;
  error: string | null;
  pendingQuestions: { plugin: string; missing: string[]; questions: string[] } | null;
  actions: ActionBadge[];
  executedCount: number;
  failedCount: number;
  assumptions: string[];
}

function actionLabel(action: { kind: string } & Record<string, unknown>): string {
  switch (action.kind) {
    case "generate_terrain":
      return "generate terrain";
    case "invoke_api":
      return `invoke ${String(action.plugin ?? "?")} x${String(action.count ?? 1)}`;
    case "import_asset":
      return `import ${String(action.asset_id ?? "?")}`;
    case "place_layout": {
      const layout = action.layout as { kind?: string } | undefined;
      return `place ${String(action.object_ref ?? "?")} (${layout?.kind ?? "?"})`;
    }
    default:
      return action.kind;
  }
}

export function buildSessionView(
  status: SessionStatus,
  scene: SceneJson,
  plan: PlanJson | null,
  report: ReportJson | null,
): SessionView {
  const actions: ActionBadge[] = [];
  if (plan) {
    for (const [i, action] of plan.actions.entries()) {
      const outcome = report?.outcomes.find((o) => o.index === i);
      actions.push({
        index: i,
        kind: action.kind,
        label: actionLabel(action),
        executed: outcome ? outcome.executed : false,
        error: outcome?.error ?? null,
      });
    }
  }
  return {
    sessionId: status.id,
    state: status.state,
    busy: status.state === "running" || status.state === "awaiting_clarification",
    instanceCount: scene.instances.length,
    hasTerrain: scene.terrain !== null,
    error: status.error,
    pendingQuestions: status.pending_clarification
      ? {
          plugin: status.pending_clarification.plugin,
          missing: [...status.pending_clarification.missing],
          questions: [...status.pending_clarification.questions],
        }
      : null,
    actions,
    executedCount: report?.executed_count ?? 0,
    failedCount: report?.failed_count ?? 0,
    assumptions: report ? [...report.assumptions] : [],
  };
}

/** Parse "2", "2.5", "true", "summer" into the JSON value to send back. */
export function parseAnswer(raw: string): unknown {
  const trimmed = raw.trim();
  if (trimmed === "true") return true;
  if (trimmed === "false") return false;
  if (trimmed !== "" && !Number.isNaN(Number(trimmed))) return Number(trimmed);
  return trimmed;
}

export function viewsEqual(a: SessionView, b: SessionView): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}
