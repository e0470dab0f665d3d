import { beforeEach, describe, expect, it } from "vitest";

import {
  countLabels,
  monthlyLabelCounts,
  parseTimestamps,
  renderBarChart,
  renderVisualizations,
} from "../src/charts.js";

beforeEach(() => {
  document.body.innerHTML = "";
});

function bars(root: HTMLElement): { label: string; count: number }[] {
  return [...root.querySelectorAll<SVGRectElement>("svg.bar-chart rect")].map((r) => ({
    label: r.dataset.label as string,
    count: Number(r.dataset.count),
  }));
}

describe("label distribution chart", () => {
  it("renders one bar per label with exact counts (60/40)", () => {
    const preds = [...Array(60).fill("positive"), ...Array(40).fill("negative")];
    const root = document.createElement("div");
    renderBarChart(root, countLabels(preds));
    expect(bars(root)).toEqual([
      { label: "negative", count: 40 },
      { label: "positive", count: 60 },
    ]);
  });
});

describe("timestamp parsing and monthly binning", () => {
  it("bins ISO dates per month", () => {
    const labels = ["a", "a", "b", "a"];
    const stamps = parseTimestamps([
      "2024-01-03",
      "2024-01-20",
      "2024-02-01",
      "2024-02-29",
    ]);
    expect(stamps).not.toBeNull();
    const series = monthlyLabelCounts(labels, stamps!);
    expect([...series.keys()]).toEqual(["2024-01", "2024-02"]);
    expect(series.get("2024-01")?.get("a")).toBe(2);
    expect(series.get("2024-02")?.get("a")).toBe(1);
    expect(series.get("2024-02")?.get("b")).toBe(1);
  });

  it("returns null when any cell is not a timestamp", () => {
    expect(parseTimestamps(["2024-01-01", "not a date"])).toBeNull();
  });

  it("skips rows with empty timestamps", () => {
    const stamps = parseTimestamps(["2024-03-05", ""]);
    const series = monthlyLabelCounts(["x", "y"], stamps!);
    expect([...series.keys()]).toEqual(["2024-03"]);
  });
});

describe("renderVisualizations", () => {
  it("shows a time series for parseable metadata", () => {
    const root = document.createElement("div");
    renderVisualizations(root, {
      predictions: ["a", "b", "a"],
      metadata: ["2024-01-01", "2024-01-15", "2024-03-02"],
    });
    expect(root.querySelector("svg.bar-chart")).not.toBeNull();
    const groups = root.querySelectorAll("svg.time-series g[data-period]");
    expect([...groups].map((g) => g.getAttribute("data-period"))).toEqual(["2024-01", "2024-03"]);
    expect(root.querySelector('[data-notice="timestamps"]')).toBeNull();
  });

  it("disables the series with a notice for a non-timestamp column", () => {
    const root = document.createElement("div");
    renderVisualizations(root, {
      predictions: ["a", "b"],
      metadata: ["soon", "later"],
    });
    expect(root.querySelector("svg.time-series")).toBeNull();
    const notice = root.querySelector('[data-notice="timestamps"]');
    expect(notice?.textContent).toMatch(/time series disabled/i);
  });

  it("renders a cluster-size chart with one bar per cluster", () => {
    const root = document.createElement("div");
    renderVisualizations(root, {
      predictions: [],
      clusterAssignments: [0, 1, 2, 1, 0, 0],
    });
    expect(bars(root)).toEqual([
      { label: "cluster 0", count: 3 },
      { label: "cluster 1", count: 2 },
      { label: "cluster 2", count: 1 },
    ]);
  });
});
