/** Result visualizations. The UI only counts and groups; every score shown
 * elsewhere comes verbatim from the server's evaluation report. */

const SVG_NS = "http://www.w3.org/2000/svg";

export function countLabels(values: string[]): Map<string, number> {
  const counts = new Map<string, number>();
  for (const value of values) counts.set(value, (counts.get(value) ?? 0) + 1);
  return counts;
}

interface BarChartOptions {
  width?: number;
  barHeight?: number;
  title?: string;
}

export function renderBarChart(
  root: HTMLElement,
  counts: Map<string, number>,
  options: BarChartOptions = {},
): SVGSVGElement {
  const doc = root.ownerDocument;
  const width = options.width ?? 360;
  const barHeight = options.barHeight ?? 22;
  const entries = [...counts.entries()].sort((a, b) => a[0].localeCompare(b[0]));
  const max = Math.max(1, ...entries.map(([, n]) => n));

  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "bar-chart");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(entries.length * (barHeight + 6) + 6));
  if (options.title) svg.setAttribute("data-title", options.title);

  entries.forEach(([label, count], i) => {
    const y = 6 + i * (barHeight + 6);
    const bar = doc.createElementNS(SVG_NS, "rect");
    bar.setAttribute("x", "120");
    bar.setAttribute("y", String(y));
    bar.setAttribute("height", String(barHeight));
    bar.setAttribute("width", String(Math.round(((width - 170) * count) / max)));
    bar.setAttribute("data-label", label);
    bar.setAttribute("data-count", String(count));
    const name = doc.createElementNS(SVG_NS, "text");
    name.setAttribute("x", "4");
    name.setAttribute("y", String(y + barHeight - 6));
    name.textContent = label;
    const value = doc.createElementNS(SVG_NS, "text");
    value.setAttribute("x", String(width - 40));
    value.setAttribute("y", String(y + barHeight - 6));
    value.textContent = String(count);
    svg.append(bar, name, value);
  });
  root.append(svg);
  return svg;
}

/** Parse a metadata column as timestamps; null when any non-empty cell is
 * unparseable (the caller then disables the time-series option). */
export function parseTimestamps(values: string[]): (Date | null)[] | null {
  const out: (Date | null)[] = [];
  for (const value of values) {
    if (value.trim() === "") {
      out.push(null);
      continue;
    }
    const ms = Date.parse(value);
    if (Number.isNaN(ms)) return null;
    out.push(new Date(ms));
  }
  return out;
}

export function monthKey(date: Date): string {
  const month = String(date.getUTCMonth() + 1).padStart(2, "0");
  return `${date.getUTCFullYear()}-${month}`;
}

/** Label counts per calendar month; rows without a timestamp are skipped. */
export function monthlyLabelCounts(
  labels: string[],
  timestamps: (Date | null)[],
): Map<string, Map<string, number>> {
  const series = new Map<string, Map<string, number>>();
  labels.forEach((label, i) => {
    const ts = timestamps[i];
    if (!ts) return;
    const key = monthKey(ts);
    const bucket = series.get(key) ?? new Map<string, number>();
    bucket.set(label, (bucket.get(label) ?? 0) + 1);
    series.set(key, bucket);
  });
  return new Map([...series.entries()].sort((a, b) => a[0].localeCompare(b[0])));
}

export function renderTimeSeries(
  root: HTMLElement,
  series: Map<string, Map<string, number>>,
): SVGSVGElement {
  const doc = root.ownerDocument;
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "time-series");
  const periods = [...series.keys()];
  const labels = [...new Set([...series.values()].flatMap((m) => [...m.keys()]))].sort();
  const groupWidth = Math.max(40, labels.length * 16 + 8);
  svg.setAttribute("width", String(periods.length * groupWidth + 40));
  svg.setAttribute("height", "160");
  const max = Math.max(1, ...[...series.values()].flatMap((m) => [...m.values()]));

  periods.forEach((period, pi) => {
    const group = doc.createElementNS(SVG_NS, "g");
    group.setAttribute("data-period", period);
    labels.forEach((label, li) => {
      const count = series.get(period)?.get(label) ?? 0;
      const height = Math.round((120 * count) / max);
      const bar = doc.createElementNS(SVG_NS, "rect");
      bar.setAttribute("x", String(20 + pi * groupWidth + li * 16));
      bar.setAttribute("y", String(130 - height));
      bar.setAttribute("width", "12");
      bar.setAttribute("height", String(height));
      bar.setAttribute("data-label", label);
      bar.setAttribute("data-count", String(count));
      group.append(bar);
    });
    const caption = doc.createElementNS(SVG_NS, "text");
    caption.setAttribute("x", String(20 + pi * groupWidth));
    caption.setAttribute("y", "150");
    caption.textContent = period;
    group.append(caption);
    svg.append(group);
  });
  root.append(svg);
  return svg;
}

export function renderClusterSizes(root: HTMLElement, assignments: (number | string)[]): SVGSVGElement {
  const counts = countLabels(assignments.map((a) => `cluster ${a}`));
  return renderBarChart(root, counts, { title: "cluster sizes" });
}

export interface VisualizationInputs {
  predictions: string[];
  metadata?: string[];
  clusterAssignments?: (number | string)[];
}

/** Top-level renderer: distribution bars always; a monthly series when the
 * metadata column parses as timestamps (a notice otherwise); cluster-size
 * bars for clustering results. */
export function renderVisualizations(root: HTMLElement, inputs: VisualizationInputs): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  if (inputs.clusterAssignments && inputs.clusterAssignments.length > 0) {
    renderClusterSizes(root, inputs.clusterAssignments);
    return;
  }
  renderBarChart(root, countLabels(inputs.predictions), { title: "predicted labels" });
  if (inputs.metadata) {
    const timestamps = parseTimestamps(inputs.metadata);
    if (timestamps === null) {
      const notice = doc.createElement("p");
      notice.setAttribute("class", "notice");
      notice.setAttribute("data-notice", "timestamps");
      notice.textContent = "Selected column does not parse as timestamps; time series disabled.";
      root.append(notice);
    } else {
      renderTimeSeries(root, monthlyLabelCounts(inputs.predictions, timestamps));
    }
  }
}
