import type { ActionCreateBody, AdapterInfo, ErrorDetail, TaskInfo } from "./types.js";

export type DialogMode = "normal" | "expert";

export interface DialogContext {
  mode: DialogMode;
  tasks: TaskInfo[];
  adaptersByTask: Record<string, AdapterInfo[]>;
}

export interface ActionFormValues {
  name: string;
  kind: "Prediction" | "Training" | "Clustering";
  targetColumn: string;
  taskId: string;
  textColumn: string;
  text2Column: string;
  goldColumn: string;
  datasetId: string;
  architecture: string;
  learningRate: string;
  epochs: string;
  algorithm: string;
  representation: string;
  k: string;
}

export const LEARNING_RATE_OPTIONS = ["1e-05", "5e-05", "0.0001", "0.0005", "0.001"];
export const DEFAULT_LEARNING_RATE = "0.0001";
export const EPOCH_OPTIONS = ["1", "2", "3", "4", "5", "10"];
export const DEFAULT_EPOCHS = "3";

export function defaultFormValues(ctx: DialogContext): ActionFormValues {
  return {
    name: "",
    kind: "Prediction",
    targetColumn: "",
    taskId: ctx.tasks[0]?.task_id ?? "",
    textColumn: "text",
    text2Column: "",
    goldColumn: "",
    datasetId: "",
    architecture: "",
    learningRate: DEFAULT_LEARNING_RATE,
    epochs: DEFAULT_EPOCHS,
    algorithm: "kmeans",
    representation: "tfidf",
    k: "2",
  };
}

function taskFor(ctx: DialogContext, taskId: string): TaskInfo | undefined {
  return ctx.tasks.find((t) => t.task_id === taskId);
}

/** Client-side check mirroring the server's parameter validation. */
export function validateForm(
  values: ActionFormValues,
  ctx: DialogContext,
): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!values.name.trim()) errors["name"] = "Name is required.";
  const needsColumn = values.kind === "Prediction" || values.kind === "Clustering";
  if (needsColumn && !values.targetColumn.trim()) {
    errors["target_column"] = "Result column is required.";
  }
  if (values.kind === "Clustering") {
    const k = Number(values.k);
    if (!Number.isInteger(k) || k < 1) errors["k"] = "k must be an integer >= 1.";
    if (!values.textColumn.trim()) errors["text_column"] = "Text column is required.";
    return errors;
  }
  const task = taskFor(ctx, values.taskId);
  if (!task) {
    errors["task_id"] = "Pick a task.";
    return errors;
  }
  if (!values.textColumn.trim()) errors["text_column"] = "Text column is required.";
  if (task.input_arity === "pair" && !values.text2Column.trim()) {
    errors["text2_column"] = "This task compares two text columns.";
  }
  if (values.kind === "Training" && !values.goldColumn.trim()) {
    errors["gold_column"] = "Training needs a label column.";
  }
  if (ctx.mode === "expert" && values.datasetId) {
    const adapters = ctx.adaptersByTask[values.taskId] ?? [];
    const match = adapters.some(
      (a) =>
        a.dataset_id === values.datasetId &&
        (!values.architecture || a.architecture === values.architecture),
    );
    if (!match) errors["dataset_id"] = "No adapter with this dataset/architecture.";
  }
  return errors;
}

/** The request body for POST /projects/{id}/actions; must stay schema-equal
 * with the server's validate_params input. */
export function buildActionBody(values: ActionFormValues, ctx: DialogContext): ActionCreateBody {
  const needsColumn = values.kind === "Prediction" || values.kind === "Clustering";
  if (values.kind === "Clustering") {
    return {
      name: values.name.trim(),
      kind: values.kind,
      target_column: values.targetColumn.trim(),
      params: {
        algorithm: values.algorithm,
        representation: values.representation,
        k: Number(values.k),
        text_column: values.textColumn.trim(),
      },
    };
  }
  const params: Record<string, unknown> = {
    task_id: values.taskId,
    text_column: values.textColumn.trim(),
  };
  const task = taskFor(ctx, values.taskId);
  if (task?.input_arity === "pair") params["text2_column"] = values.text2Column.trim();
  if (values.goldColumn.trim()) params["gold_column"] = values.goldColumn.trim();
  if (ctx.mode === "expert") {
    if (values.datasetId) params["dataset_id"] = values.datasetId;
    if (values.architecture) params["architecture"] = values.architecture;
    if (values.kind === "Training") {
      params["learning_rate"] = Number(values.learningRate);
      params["epochs"] = Number(values.epochs);
    }
  }
  return {
    name: values.name.trim(),
    kind: values.kind,
    target_column: needsColumn ? values.targetColumn.trim() : null,
    params,
  };
}

export interface DialogHandle {
  form: HTMLFormElement;
  values(): ActionFormValues;
  setValue(field: keyof ActionFormValues, value: string): void;
  submit(): void;
  showServerError(detail: ErrorDetail): void;
}

interface DialogCallbacks {
  onSubmit: (body: ActionCreateBody) => void;
  onUpload?: (file: File, taskId: string, datasetId: string) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function field(
  doc: Document,
  labelText: string,
  input: HTMLElement,
  name: string,
): HTMLDivElement {
  const wrap = el(doc, "div", { class: "field", "data-field": name });
  const label = el(doc, "label", { for: `af-${name}` }, labelText);
  input.id = `af-${name}`;
  const error = el(doc, "span", { class: "error", "data-error-for": name });
  wrap.append(label, input, error);
  return wrap;
}

function select(doc: Document, name: string, options: [string, string][], value: string) {
  const node = el(doc, "select", { name });
  for (const [optValue, optLabel] of options) {
    const opt = el(doc, "option", { value: optValue }, optLabel);
    if (optValue === value) opt.setAttribute("selected", "selected");
    node.append(opt);
  }
  node.value = value;
  return node;
}

function input(doc: Document, name: string, value: string, type = "text") {
  const node = el(doc, "input", { name, type });
  node.value = value;
  return node;
}

/** Build the action creation dialog. Normal mode shows name, action type,
 * result column, and task; expert mode adds adapter dataset/architecture
 * dropdowns, hyperparameter dropdowns, and an adapter upload control. */
export function renderActionDialog(
  root: HTMLElement,
  ctx: DialogContext,
  callbacks: DialogCallbacks,
): DialogHandle {
  const doc = root.ownerDocument;
  const state = defaultFormValues(ctx);
  const form = el(doc, "form", { class: "action-dialog", "data-mode": ctx.mode });
  root.append(form);

  function adapterOptions(taskId: string): AdapterInfo[] {
    return ctx.adaptersByTask[taskId] ?? [];
  }

  function rebuild(): void {
    form.textContent = "";
    form.append(field(doc, "Name", input(doc, "name", state.name), "name"));
    form.append(
      field(
        doc,
        "Action type",
        select(
          doc,
          "kind",
          [
            ["Prediction", "Prediction"],
            ["Training", "Training"],
            ["Clustering", "Clustering"],
          ],
          state.kind,
        ),
        "kind",
      ),
    );
    if (state.kind !== "Training") {
      form.append(
        field(doc, "Result column", input(doc, "target_column", state.targetColumn), "target_column"),
      );
    }

    if (state.kind === "Clustering") {
      form.append(
        field(
          doc,
          "Algorithm",
          select(
            doc,
            "algorithm",
            [
              ["kmeans", "K-Means"],
              ["hierarchical", "Hierarchical"],
            ],
            state.algorithm,
          ),
          "algorithm",
        ),
        field(
          doc,
          "Representation",
          select(
            doc,
            "representation",
            [
              ["tfidf", "Tf-Idf"],
              ["sbert", "Sentence embeddings"],
            ],
            state.representation,
          ),
          "representation",
        ),
        field(doc, "Clusters (k)", input(doc, "k", state.k, "number"), "k"),
        field(doc, "Text column", input(doc, "text_column", state.textColumn), "text_column"),
      );
    } else {
      const taskChoices: [string, string][] = ctx.tasks.map((t) => [t.task_id, t.display_name]);
      form.append(field(doc, "Task", select(doc, "task_id", taskChoices, state.taskId), "task_id"));
      const task = taskFor(ctx, state.taskId);
      if (task) {
        const info = el(doc, "p", { class: "task-info", "data-field": "task_info" }, task.description);
        form.append(info);
      }
      form.append(
        field(doc, "Text column", input(doc, "text_column", state.textColumn), "text_column"),
      );
      if (task?.input_arity === "pair") {
        form.append(
          field(
            doc,
            "Second text column",
            input(doc, "text2_column", state.text2Column),
            "text2_column",
          ),
        );
      }
      form.append(
        field(
          doc,
          state.kind === "Training" ? "Label column" : "Label column (optional, for evaluation)",
          input(doc, "gold_column", state.goldColumn),
          "gold_column",
        ),
      );

      if (ctx.mode === "expert") {
        const adapters = adapterOptions(state.taskId);
        const datasets = [...new Set(adapters.map((a) => a.dataset_id))];
        const datasetChoices: [string, string][] = [
          ["", "(default adapter)"],
          ...datasets.map((d): [string, string] => [d, d]),
        ];
        form.append(
          field(doc, "Adapter dataset", select(doc, "dataset_id", datasetChoices, state.datasetId), "dataset_id"),
        );
        const architectures = [
          ...new Set(
            adapters
              .filter((a) => !state.datasetId || a.dataset_id === state.datasetId)
              .map((a) => a.architecture),
          ),
        ];
        const archChoices: [string, string][] = [
          ["", "(any)"],
          ...architectures.map((a): [string, string] => [a, a]),
        ];
        form.append(
          field(doc, "Architecture", select(doc, "architecture", archChoices, state.architecture), "architecture"),
        );
        if (state.kind === "Training") {
          form.append(
            field(
              doc,
              "Learning rate",
              select(doc, "learning_rate", LEARNING_RATE_OPTIONS.map((o) => [o, o] as [string, string]), state.learningRate),
              "learning_rate",
            ),
            field(
              doc,
              "Epochs",
              select(doc, "epochs", EPOCH_OPTIONS.map((o) => [o, o] as [string, string]), state.epochs),
              "epochs",
            ),
          );
        }
        const uploadWrap = el(doc, "div", { class: "field", "data-field": "adapter_upload" });
        uploadWrap.append(el(doc, "label", { for: "af-adapter-upload" }, "Upload your own adapter (zip)"));
        const fileInput = input(doc, "adapter_upload", "", "file");
        fileInput.id = "af-adapter-upload";
        fileInput.addEventListener("change", () => {
          const file = (fileInput as HTMLInputElement).files?.[0];
          if (file && callbacks.onUpload) {
            callbacks.onUpload(file, state.taskId, file.name.replace(/\.zip$/i, ""));
          }
        });
        uploadWrap.append(fileInput, el(doc, "span", { class: "error", "data-error-for": "adapter_upload" }));
        form.append(uploadWrap);
      }
    }

    const submit = el(doc, "button", { type: "submit" }, "Create action");
    const formError = el(doc, "p", { class: "error", "data-error-for": "form" });
    form.append(submit, formError);

    form.querySelectorAll("input, select").forEach((node) => {
      node.addEventListener("change", () => {
        const target = node as HTMLInputElement | HTMLSelectElement;
        const name = target.name;
        const mapping: Record<string, keyof ActionFormValues> = {
          name: "name",
          kind: "kind",
          target_column: "targetColumn",
          task_id: "taskId",
          text_column: "textColumn",
          text2_column: "text2Column",
          gold_column: "goldColumn",
          dataset_id: "datasetId",
          architecture: "architecture",
          learning_rate: "learningRate",
          epochs: "epochs",
          algorithm: "algorithm",
          representation: "representation",
          k: "k",
        };
        const key = mapping[name];
        if (!key) return;
        state[key] = target.value as never;
        if (name === "kind" || name === "task_id" || name === "dataset_id") rebuild();
      });
      node.addEventListener("input", () => {
        const target = node as HTMLInputElement;
        const simple: Record<string, keyof ActionFormValues> = {
          name: "name",
          target_column: "targetColumn",
          text_column: "textColumn",
          text2_column: "text2Column",
          gold_column: "goldColumn",
          k: "k",
        };
        const key = simple[target.name];
        if (key) state[key] = target.value as never;
      });
    });
  }

  function clearErrors(): void {
    form.querySelectorAll("[data-error-for]").forEach((node) => (node.textContent = ""));
  }

  function setError(name: string, message: string): void {
    const node = form.querySelector(`[data-error-for="${name}"]`);
    if (node) node.textContent = message;
    else {
      const fallback = form.querySelector('[data-error-for="form"]');
      if (fallback) fallback.textContent = message;
    }
  }

  function doSubmit(): void {
    clearErrors();
    const errors = validateForm(state, ctx);
    if (Object.keys(errors).length > 0) {
      for (const [name, message] of Object.entries(errors)) setError(name, message);
      return; // no request leaves the client
    }
    callbacks.onSubmit(buildActionBody(state, ctx));
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    doSubmit();
  });

  rebuild();

  return {
    form,
    values: () => ({ ...state }),
    setValue(fieldName, value) {
      state[fieldName] = value as never;
      rebuild();
    },
    submit: doSubmit,
    showServerError(detail) {
      clearErrors();
      let message = detail.message;
      if (detail.indices && detail.indices.length > 0) {
        message = `${detail.message} (rows ${detail.indices.join(", ")})`;
        setError("gold_column", message);
      } else {
        setError("form", message);
      }
    },
  };
}
