/** Turns recorded concept contributions into a signed bar chart model.
 *
 * Convention carried over from the service: positive contributions push the
 * decision toward "poisonous", negative ones toward "edible". The exact
 * decimal strings are kept for labels; floats appear only to size the bars.
 */

import type { ContributionDoc } from "./types.js";

export interface ContributionBar {
  concept: string;
  /** Exact decimal string as recorded by the service. */
  contribution: string;
  /** Which side of the axis the bar extends toward. */
  side: "poisonous" | "edible";
  /** Bar length as a percentage of the largest magnitude shown, 2 decimals. */
  widthPercent: number;
}

export type ContributionView =
  | { kind: "bars"; bars: ContributionBar[]; shown: number; total: number }
  | { kind: "placeholder"; message: string };

const PLACEHOLDER = "no contribution analysis available for this decision";

function isZero(text: string): boolean {
  for (const ch of text) {
    if (ch >= "1" && ch <= "9") return false;
  }
  return true;
}

/**
 * Build the chart for the top `topN` contributions. Zero entries carry no
 * signal and are dropped; an empty or all-zero list yields a placeholder.
 * Service order (largest magnitude first) is preserved, never recomputed.
 */
export function renderContributions(
  contributions: readonly ContributionDoc[],
  topN = 15,
): ContributionView {
  const nonzero = contributions.filter((c) => !isZero(c.contribution));
  if (nonzero.length === 0) {
    return { kind: "placeholder", message: PLACEHOLDER };
  }
  const shown = nonzero.slice(0, Math.max(topN, 0));
  if (shown.length === 0) {
    return { kind: "placeholder", message: PLACEHOLDER };
  }
  const maxMagnitude = Math.max(...shown.map((c) => Math.abs(parseFloat(c.contribution))));
  const bars = shown.map((c) => ({
    concept: c.concept,
    contribution: c.contribution,
    side: (c.contribution.startsWith("-") ? "edible" : "poisonous") as "edible" | "poisonous",
    widthPercent:
      Math.round((Math.abs(parseFloat(c.contribution)) / maxMagnitude) * 10000) / 100,
  }));
  return { kind: "bars", bars, shown: bars.length, total: nonzero.length };
}
