import type { AdapterInfo, TaskInfo } from "../src/types.js";
import type { DialogContext } from "../src/dialog.js";

export const SENTIMENT: TaskInfo = {
  task_id: "sentiment",
  display_name: "Sentiment Analysis",
  description: "Predict the sentiment tone of a text.",
  input_arity: "single",
  labels: [
    { name: "positive", value: "positive" },
    { name: "negative", value: "negative" },
  ],
};

export const STS: TaskInfo = {
  task_id: "sts",
  display_name: "Semantic Textual Similarity",
  description: "Decide whether two texts are duplicates.",
  input_arity: "pair",
  labels: [
    { name: "duplicate", value: "duplicate" },
    { name: "not duplicate", value: "not_duplicate" },
  ],
};

export const SENTIMENT_ADAPTERS: AdapterInfo[] = [
  {
    task_id: "sentiment",
    dataset_id: "imdb",
    architecture: "pfeiffer",
    base_model_id: "distilbert-base-uncased",
    source: "hub",
    locator: "hub://sentiment/imdb@pfeiffer",
  },
  {
    task_id: "sentiment",
    dataset_id: "rt",
    architecture: "pfeiffer",
    base_model_id: "distilbert-base-uncased",
    source: "hub",
    locator: "hub://sentiment/rt@pfeiffer",
  },
  {
    task_id: "sentiment",
    dataset_id: "sst-2",
    architecture: "houlsby",
    base_model_id: "bert-base-uncased",
    source: "hub",
    locator: "hub://sentiment/sst-2@houlsby",
  },
];

export function dialogContext(mode: "normal" | "expert" = "normal"): DialogContext {
  return {
    mode,
    tasks: [SENTIMENT, STS],
    adaptersByTask: { sentiment: SENTIMENT_ADAPTERS, sts: [] },
  };
}
