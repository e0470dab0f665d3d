export interface LabelSpec {
  name: string;
  value: string;
}

export interface TaskInfo {
  task_id: string;
  display_name: string;
  description: string;
  input_arity: "single" | "pair";
  labels: LabelSpec[];
}

export interface AdapterInfo {
  task_id: string;
  dataset_id: string;
  architecture: string;
  base_model_id: string;
  source: string;
  locator: string;
}

export interface ProjectInfo {
  id: string;
  name: string;
  sheet: { backend: string; locator: string; worksheet: string | null };
  created_at: string;
}

export interface EvalReportInfo {
  type: "eval_report";
  n: number;
  accuracy?: number;
  macro_f1?: number;
  label_distribution: Record<string, number>;
  per_class?: { label: string; precision: number; recall: number; f1: number; support: number }[];
  majority_baseline?: { accuracy: number; macro_f1: number };
  random_baseline?: { accuracy: number; macro_f1: number };
  significance?: {
    delta_observed: number;
    p_value: number;
    resamples: number;
    seed: number;
    significant: boolean;
  };
}

export interface ClusterResultInfo {
  type: "cluster_result";
  algorithm: string;
  k: number;
  assignments: number[];
  inertia: number | null;
  merge_heights: number[];
}

export interface ArtifactResultInfo {
  type: "artifact";
  kind: string;
  size_bytes: number;
}

export type ActionResult = EvalReportInfo | ClusterResultInfo | ArtifactResultInfo;

export type ActionStatus = "Queued" | "Running" | "Completed" | "Failed";

export interface ActionInfo {
  id: string;
  project_id: string;
  name: string;
  kind: "Prediction" | "Training" | "Clustering";
  params: Record<string, unknown>;
  target_column: string | null;
  status: ActionStatus;
  result: ActionResult | null;
  error: string | null;
  artifact_available: boolean;
  created_at: string;
  finished_at: string | null;
}

export const TERMINAL_STATUSES: ReadonlySet<ActionStatus> = new Set(["Completed", "Failed"]);

export interface ActionCreateBody {
  name: string;
  kind: "Prediction" | "Training" | "Clustering";
  target_column: string | null;
  params: Record<string, unknown>;
}

export interface ErrorDetail {
  error: string;
  message: string;
  indices?: number[];
}
