import { beforeEach, describe, expect, it, vi } from "vitest";

import {
  buildActionBody,
  defaultFormValues,
  renderActionDialog,
  validateForm,
  DEFAULT_EPOCHS,
  DEFAULT_LEARNING_RATE,
} from "../src/dialog.js";
import { dialogContext } from "./fixtures.js";

function mount(mode: "normal" | "expert" = "normal", onSubmit = vi.fn()) {
  const root = document.createElement("div");
  document.body.append(root);
  const handle = renderActionDialog(root, dialogContext(mode), { onSubmit });
  return { root, handle, onSubmit };
}

function fieldNames(root: HTMLElement): string[] {
  return [...root.querySelectorAll<HTMLElement>("[data-field]")].map(
    (node) => node.dataset.field as string,
  );
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("normal mode (Fig-2 base field set)", () => {
  it("shows name, action type, result column, and task", () => {
    const { root } = mount("normal");
    const names = fieldNames(root);
    expect(names).toContain("name");
    expect(names).toContain("kind");
    expect(names).toContain("target_column");
    expect(names).toContain("task_id");
  });

  it("shows no adapter dropdowns", () => {
    const { root } = mount("normal");
    const names = fieldNames(root);
    expect(names).not.toContain("dataset_id");
    expect(names).not.toContain("architecture");
    expect(names).not.toContain("adapter_upload");
  });

  it("shows the task description as inline info", () => {
    const { root } = mount("normal");
    const info = root.querySelector('[data-field="task_info"]');
    expect(info?.textContent).toContain("sentiment tone");
  });

  it("adds a second text column for pair tasks", () => {
    const { root, handle } = mount("normal");
    expect(fieldNames(root)).not.toContain("text2_column");
    handle.setValue("taskId", "sts");
    expect(fieldNames(root)).toContain("text2_column");
  });
});

describe("expert mode", () => {
  it("adds dataset and architecture dropdowns and the upload control", () => {
    const { root } = mount("expert");
    const names = fieldNames(root);
    expect(names).toContain("dataset_id");
    expect(names).toContain("architecture");
    expect(names).toContain("adapter_upload");
  });

  it("populates dataset options from the adapter list", () => {
    const { root } = mount("expert");
    const options = [...root.querySelectorAll<HTMLOptionElement>('select[name="dataset_id"] option')];
    expect(options.map((o) => o.value)).toEqual(["", "imdb", "rt", "sst-2"]);
  });

  it("filters architectures by the chosen dataset", () => {
    const { root, handle } = mount("expert");
    handle.setValue("datasetId", "sst-2");
    const options = [...root.querySelectorAll<HTMLOptionElement>('select[name="architecture"] option')];
    expect(options.map((o) => o.value)).toEqual(["", "houlsby"]);
  });

  it("shows hyperparameter dropdowns with spec defaults for Training", () => {
    const { root, handle } = mount("expert");
    handle.setValue("kind", "Training");
    const lr = root.querySelector<HTMLSelectElement>('select[name="learning_rate"]');
    const epochs = root.querySelector<HTMLSelectElement>('select[name="epochs"]');
    expect(lr?.value).toBe(DEFAULT_LEARNING_RATE);
    expect(Number(lr?.value)).toBe(1e-4);
    expect(epochs?.value).toBe(DEFAULT_EPOCHS);
  });
});

describe("client-side validation", () => {
  it("blocks submission with empty name and shows an inline error", () => {
    const { root, handle, onSubmit } = mount("normal");
    handle.setValue("targetColumn", "pred");
    handle.submit();
    expect(onSubmit).not.toHaveBeenCalled();
    const error = root.querySelector('[data-error-for="name"]');
    expect(error?.textContent).toMatch(/required/i);
  });

  it("rejects clustering with k = 0", () => {
    const ctx = dialogContext();
    const values = { ...defaultFormValues(ctx), name: "c", kind: "Clustering" as const, targetColumn: "cl", k: "0" };
    const errors = validateForm(values, ctx);
    expect(errors["k"]).toBeTruthy();
  });

  it("requires the label column for Training", () => {
    const ctx = dialogContext();
    const values = { ...defaultFormValues(ctx), name: "t", kind: "Training" as const };
    const errors = validateForm(values, ctx);
    expect(errors["gold_column"]).toBeTruthy();
  });

  it("submits a valid form exactly once with the built body", () => {
    const { handle, onSubmit } = mount("normal");
    handle.setValue("name", "my run");
    handle.setValue("targetColumn", "pred");
    handle.submit();
    expect(onSubmit).toHaveBeenCalledTimes(1);
    const body = onSubmit.mock.calls[0]![0];
    expect(body).toEqual({
      name: "my run",
      kind: "Prediction",
      target_column: "pred",
      params: { task_id: "sentiment", text_column: "text" },
    });
  });
});

describe("server error display", () => {
  it("renders label-mismatch indices inline", () => {
    const { root, handle } = mount("normal");
    handle.showServerError({
      error: "MismatchError",
      message: "label mismatch at rows [3, 7]",
      indices: [3, 7],
    });
    const error = root.querySelector('[data-error-for="gold_column"]');
    expect(error?.textContent).toContain("3, 7");
  });

  it("falls back to the form-level error slot", () => {
    const { root, handle } = mount("normal");
    handle.showServerError({ error: "UnknownTask", message: "task 'x' not in catalog" });
    expect(root.querySelector('[data-error-for="form"]')?.textContent).toContain("not in catalog");
  });
});

describe("buildActionBody parity shapes", () => {
  it("expert training body carries adapter choice and hyperparameters", () => {
    const ctx = dialogContext("expert");
    const values = {
      ...defaultFormValues(ctx),
      name: "train",
      kind: "Training" as const,
      goldColumn: "label",
      datasetId: "sst-2",
      architecture: "houlsby",
    };
    const body = buildActionBody(values, ctx);
    expect(body.target_column).toBeNull();
    expect(body.params).toMatchObject({
      task_id: "sentiment",
      dataset_id: "sst-2",
      architecture: "houlsby",
      gold_column: "label",
      learning_rate: 1e-4,
      epochs: 3,
    });
  });

  it("clustering body uses numeric k", () => {
    const ctx = dialogContext();
    const values = {
      ...defaultFormValues(ctx),
      name: "c",
      kind: "Clustering" as const,
      targetColumn: "cl",
      k: "4",
    };
    expect(buildActionBody(values, ctx).params).toEqual({
      algorithm: "kmeans",
      representation: "tfidf",
      k: 4,
      text_column: "text",
    });
  });
});
