import type { ReportRow } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const SERIES: { key: keyof Omit<ReportRow, "day">; color: string }[] = [
  { key: "human_recs", color: "#4a7ab5" },
  { key: "bot_recs", color: "#b5564a" },
  { key: "emoji_reactions", color: "#4aa56b" },
  { key: "comments", color: "#8a6fb5" },
];

/** Cumulative engagement as four polylines; one x step per day. */
export function renderEngagementChart(
  rows: ReportRow[],
  width = 260,
  height = 60,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "engagement-chart");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  if (!rows.length) return svg;

  const maxY = Math.max(1, ...rows.map((r) => Math.max(...SERIES.map((s) => r[s.key]))));
  const stepX = rows.length > 1 ? width / (rows.length - 1) : 0;
  const scaleY = (value: number): number => height - (value / maxY) * (height - 4) - 2;

  for (const series of SERIES) {
    const line = document.createElementNS(SVG_NS, "polyline");
    const points = rows
      .map((row, i) => `${(i * stepX).toFixed(1)},${scaleY(row[series.key]).toFixed(1)}`)
      .join(" ");
    line.setAttribute("points", points);
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", series.color);
    line.setAttribute("stroke-width", "1.5");
    line.setAttribute("data-series", series.key);
    svg.appendChild(line);
  }
  return svg;
}
