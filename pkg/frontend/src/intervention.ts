/** What-if probing against the /whatif endpoint.
 *
 * A session starts from a signed prediction and lets the user override
 * concept activations. Every probe result is marked unsigned and shown next
 * to the original signed decision, which the session never mutates. Probes
 * race: a new apply cancels the one in flight, so the panel always reflects
 * the latest request.
 */

import { InspectorClient, ServiceError } from "./api.js";
import type { ContributionDoc, InferResponse, WhatIfResponse } from "./types.js";

export interface PredictionPanel {
  decision: string;
  confidence: string;
  certainty: string;
  distanceFromThreshold: string;
  probabilities: { edible: string; poisonous: string };
  unsigned: boolean;
  overridesApplied: Record<string, number> | null;
  contributions: ContributionDoc[] | null;
}

/** Panel for the signed decision a session starts from. */
export function panelFromInference(response: InferResponse): PredictionPanel {
  return {
    decision: response.decision,
    confidence: response.confidence,
    certainty: response.certainty_level,
    distanceFromThreshold: response.distance_from_threshold,
    probabilities: { ...response.probabilities },
    unsigned: false,
    overridesApplied: null,
    contributions: null,
  };
}

function panelFromWhatIf(response: WhatIfResponse): PredictionPanel {
  return {
    decision: response.decision,
    confidence: response.confidence,
    certainty: response.certainty_level,
    distanceFromThreshold: response.distance_from_threshold,
    probabilities: { ...response.probabilities },
    unsigned: true,
    overridesApplied: { ...response.overrides_applied },
    contributions: response.concept_contributions,
  };
}

function isAbort(err: unknown): boolean {
  return err instanceof Error && err.name === "AbortError";
}

export class InterventionSession {
  /** The signed starting point, displayed alongside every probe. */
  readonly original: PredictionPanel;
  /** What the panel currently shows: the original or the latest probe. */
  panel: PredictionPanel;
  /** Inline message from a failed probe; the panel keeps its last state. */
  message: string | null = null;

  private readonly client: InspectorClient;
  private readonly features: Record<string, string>;
  private inflight: AbortController | null = null;

  constructor(client: InspectorClient, features: Record<string, string>, original: PredictionPanel) {
    this.client = client;
    this.features = { ...features };
    this.original = original;
    this.panel = original;
  }

  /** Probe the service with concept overrides. Supersedes any probe still
   * in flight. On error the panel is left untouched and the service's
   * message is surfaced inline. */
  async applyIntervention(overrides: Record<string, number>): Promise<void> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const result = await this.client.whatIf(this.features, overrides, controller.signal);
      if (this.inflight !== controller) return;
      this.inflight = null;
      this.panel = panelFromWhatIf(result);
      this.message = null;
    } catch (err) {
      if (isAbort(err) || this.inflight !== controller) return;
      this.inflight = null;
      this.message =
        err instanceof ServiceError ? err.message : "could not reach the record service";
    }
  }

  /** Drop the probe and show the signed original again. Local only. */
  reset(): void {
    this.inflight?.abort();
    this.inflight = null;
    this.panel = this.original;
    this.message = null;
  }
}
