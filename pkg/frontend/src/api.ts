/** Thin HTTP client for the record service.
 *
 * The inspector trusts the service for every judgement: verification
 * verdicts, predictions, contribution values. This client only moves JSON
 * across the wire. The fetch implementation is injectable so tests can
 * replay recorded responses.
 */

import type {
  EnvelopeDoc,
  HealthResponse,
  InferResponse,
  KeyRecordDoc,
  VerifyResponse,
  WhatIfResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Non-2xx reply from the service. Carries the service's own message. */
export class ServiceError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ServiceError";
    this.status = status;
  }
}

async function decode<T>(response: Response): Promise<T> {
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // fall through, handled by status check below
  }
  if (!response.ok) {
    const msg =
      body !== null && typeof body === "object" && typeof (body as { error?: unknown }).error === "string"
        ? (body as { error: string }).error
        : `service replied with status ${response.status}`;
    throw new ServiceError(response.status, msg);
  }
  if (body === null) {
    throw new ServiceError(response.status, "service reply was not JSON");
  }
  return body as T;
}

export class InspectorClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = (url, init) => fetch(url, init)) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  private async get<T>(path: string): Promise<T> {
    return decode<T>(await this.fetchFn(this.baseUrl + path));
  }

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    return decode<T>(response);
  }

  health(): Promise<HealthResponse> {
    return this.get("/health");
  }

  getBom(payloadDigest: string): Promise<EnvelopeDoc> {
    return this.get(`/bom/${payloadDigest}`);
  }

  getKey(keyid: string): Promise<KeyRecordDoc> {
    return this.get(`/keys/${keyid}`);
  }

  /** Ask the service to check an envelope. The badge shown in the UI comes
   * from this reply and nowhere else. */
  verify(envelope: EnvelopeDoc): Promise<VerifyResponse> {
    return this.post("/verify", envelope);
  }

  infer(features: Record<string, string>): Promise<InferResponse> {
    return this.post("/infer", { features });
  }

  whatIf(
    features: Record<string, string>,
    overrides: Record<string, number>,
    signal?: AbortSignal,
  ): Promise<WhatIfResponse> {
    return this.post("/whatif", { features, overrides }, signal);
  }
}
