/** Builds the inspector's view of one signed record.
 *
 * The trust badge has exactly three states and a single source: the
 * service's /verify endpoint. "verified" and "failed" restate its verdict;
 * "unchecked" means the verdict could not be obtained at all. Nothing in
 * this module inspects signatures or recomputes digests.
 */

import { InspectorClient, ServiceError } from "./api.js";
import type {
  ContributionDoc,
  EnvelopeDoc,
  InferencePayload,
  TrainingPayload,
} from "./types.js";

export type BadgeState = "verified" | "failed" | "unchecked";

export interface TrainingView {
  kind: "training";
  projectName: string;
  purpose: string;
  foldAccuracies: string[];
  meanAccuracy: string;
  stdAccuracy: string;
  finalTest: {
    accuracy: string;
    sensitivity: string;
    specificity: string;
    truePositives: number;
    trueNegatives: number;
    falsePositives: number;
    falseNegatives: number;
  };
  hyperparameters: Record<string, string | number>;
  environment: { os: string; cpu: string; toolkitVersion: string; componentVersions: Record<string, string> };
  datasetName: string;
  datasetDigest: string;
  modelDigest: string;
}

export interface InferenceView {
  kind: "inference";
  inferenceId: string;
  timestamp: string;
  decision: string;
  confidence: string;
  certainty: string;
  distanceFromThreshold: string;
  threshold: string;
  trainingLink: string;
  pathway: { step: string; inputDigest: string; outputDigest: string }[];
  contributions: ContributionDoc[];
  rawFeatures: Record<string, string>;
}

export type BomView = TrainingView | InferenceView;

export interface InspectorView {
  badge: BadgeState;
  error: string | null;
  failures: { stage: string; message: string }[];
  keyidUsed: string | null;
  bom: BomView | null;
}

/** Decode the envelope's base64 payload into a JSON document. Base64 is an
 * encoding, not a check; whether the bytes are trustworthy is the service's
 * verdict to give. */
export function decodePayload(envelope: EnvelopeDoc): unknown {
  const raw = atob(envelope.payload);
  const bytes = Uint8Array.from(raw, (ch) => ch.charCodeAt(0));
  return JSON.parse(new TextDecoder().decode(bytes));
}

function isInferencePayload(payload: unknown): payload is InferencePayload {
  return typeof payload === "object" && payload !== null && "inference_identification" in payload;
}

function isTrainingPayload(payload: unknown): payload is TrainingPayload {
  return typeof payload === "object" && payload !== null && "performance_metrics" in payload;
}

function trainingView(payload: TrainingPayload): TrainingView {
  const cv = payload.performance_metrics.cv;
  const final = payload.performance_metrics.final_test;
  return {
    kind: "training",
    projectName: payload.project_metadata.name,
    purpose: payload.project_metadata.purpose,
    foldAccuracies: [...cv.per_fold_accuracy],
    meanAccuracy: cv.mean_accuracy,
    stdAccuracy: cv.std_accuracy,
    finalTest: {
      accuracy: final.accuracy,
      sensitivity: final.sensitivity,
      specificity: final.specificity,
      truePositives: final.true_positives,
      trueNegatives: final.true_negatives,
      falsePositives: final.false_positives,
      falseNegatives: final.false_negatives,
    },
    hyperparameters: { ...payload.training_methodology.hyperparameters },
    environment: {
      os: payload.environment.os,
      cpu: payload.environment.cpu,
      toolkitVersion: payload.environment.toolkit_version,
      componentVersions: { ...payload.environment.component_versions },
    },
    datasetName: payload.data_summary.dataset_name,
    datasetDigest: payload.data_summary.dataset_digest.hex,
    modelDigest: payload.output_artifacts.model_digest.hex,
  };
}

function inferenceView(payload: InferencePayload): InferenceView {
  const metrics = payload.inference_results.decision_metrics;
  return {
    kind: "inference",
    inferenceId: payload.inference_identification.inference_id,
    timestamp: payload.inference_identification.timestamp,
    decision: metrics.decision,
    confidence: metrics.confidence,
    certainty: metrics.certainty_level,
    distanceFromThreshold: metrics.distance_from_threshold,
    threshold: metrics.threshold,
    trainingLink: payload.inference_identification.tbom_link.hex,
    pathway: payload.decision_pathway.map((stage) => ({
      step: stage.step,
      inputDigest: stage.input_digest.hex,
      outputDigest: stage.output_digest.hex,
    })),
    contributions: payload.inference_results.feature_analysis.concept_contributions,
    rawFeatures: { ...payload.input_metadata.raw_features },
  };
}

export function bomViewFromPayload(payload: unknown): BomView | null {
  if (isInferencePayload(payload)) return inferenceView(payload);
  if (isTrainingPayload(payload)) return trainingView(payload);
  return null;
}

function unreachable(message: string): InspectorView {
  return { badge: "unchecked", error: message, failures: [], keyidUsed: null, bom: null };
}

function describe(err: unknown): string {
  if (err instanceof ServiceError) return err.message;
  if (err instanceof Error) return `could not reach the record service (${err.message})`;
  return "could not reach the record service";
}

/**
 * Load one record into the inspector.
 *
 * `ref` is either a payload digest (fetched via GET /bom/{digest}) or an
 * already-held envelope document, e.g. one pasted by the user. The envelope
 * is then sent to POST /verify and the badge restates that verdict. Any
 * failure to obtain a verdict leaves the badge "unchecked" with an error
 * banner; it never downgrades to "failed", because failed means the service
 * actually rejected the record.
 */
export async function loadBomView(
  client: InspectorClient,
  ref: string | EnvelopeDoc,
): Promise<InspectorView> {
  let envelope: EnvelopeDoc;
  if (typeof ref === "string") {
    try {
      envelope = await client.getBom(ref);
    } catch (err) {
      return unreachable(describe(err));
    }
  } else {
    envelope = ref;
  }

  let bom: BomView | null = null;
  let decodeError: string | null = null;
  try {
    bom = bomViewFromPayload(decodePayload(envelope));
  } catch {
    decodeError = "payload is not readable as a record";
  }

  try {
    const verdict = await client.verify(envelope);
    return {
      badge: verdict.pass ? "verified" : "failed",
      error: decodeError,
      failures: verdict.failures,
      keyidUsed: verdict.keyid_used,
      bom,
    };
  } catch (err) {
    return { badge: "unchecked", error: describe(err), failures: [], keyidUsed: null, bom };
  }
}
