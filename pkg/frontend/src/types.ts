/** Wire shapes of the record service. Numeric fields arrive as fixed-point
 * decimal strings and are displayed verbatim; this module never converts
 * them back to floats for anything the user reads. */

export interface DigestDoc {
  algorithm: string;
  hex: string;
}

export interface SignatureDoc {
  keyid: string;
  sig: string;
}

/** A signed envelope exactly as the service stores and returns it. */
export interface EnvelopeDoc {
  payload: string;
  payloadType: string;
  signatures: SignatureDoc[];
}

export interface VerifyResponse {
  pass: boolean;
  schema_valid: boolean;
  signature_valid: boolean;
  keyid_used: string | null;
  failures: { stage: string; message: string }[];
}

export interface HealthResponse {
  status: string;
  toolkit_version: string;
  keyid: string;
  model_digest: string;
  tbom_link: string;
}

export interface KeyRecordDoc {
  keyid: string;
  role_identity: string;
  verifying_key: string;
  bound_measurement: DigestDoc;
  issued_at: string;
}

export interface ContributionDoc {
  concept: string;
  contribution: string;
}

export interface InferResponse {
  decision: string;
  confidence: string;
  certainty_level: string;
  distance_from_threshold: string;
  probabilities: { edible: string; poisonous: string };
  inference_id: string;
  payload_digest: string;
  envelope: EnvelopeDoc;
}

export interface WhatIfResponse {
  unsigned: true;
  decision: string;
  confidence: string;
  certainty_level: string;
  distance_from_threshold: string;
  probabilities: { edible: string; poisonous: string };
  concept_contributions: ContributionDoc[];
  overrides_applied: Record<string, number>;
}

/* Decoded envelope payloads. Only the fields the inspector displays are
 * typed; unknown extras pass through untouched. */

export interface TrainingPayload {
  project_metadata: { name: string; purpose: string; role_identity: string; version: string };
  performance_metrics: {
    cv: { per_fold_accuracy: string[]; mean_accuracy: string; std_accuracy: string };
    final_test: {
      accuracy: string;
      sensitivity: string;
      specificity: string;
      true_positives: number;
      true_negatives: number;
      false_positives: number;
      false_negatives: number;
    };
  };
  training_methodology: {
    cv_folds: number;
    split_fraction_test: string;
    hyperparameters: Record<string, string | number>;
    final_model_trained_on: string;
  };
  environment: {
    os: string;
    cpu: string;
    toolkit_version: string;
    component_versions: Record<string, string>;
  };
  data_summary: { dataset_name: string; dataset_digest: DigestDoc };
  output_artifacts: { model_digest: DigestDoc };
}

export interface PathwayStage {
  step: string;
  input_digest: DigestDoc;
  output_digest: DigestDoc;
}

export interface InferencePayload {
  inference_identification: { inference_id: string; timestamp: string; tbom_link: DigestDoc };
  inference_results: {
    decision_metrics: {
      decision: string;
      confidence: string;
      certainty_level: string;
      distance_from_threshold: string;
      threshold: string;
    };
    feature_analysis: { concept_contributions: ContributionDoc[] };
  };
  decision_pathway: PathwayStage[];
  input_metadata: { raw_features: Record<string, string> };
}
