import { describe, expect, it } from "vitest";

import { InspectorClient, type FetchLike } from "../src/api.js";
import { InterventionSession, panelFromInference } from "../src/intervention.js";
import { renderIntervention } from "../src/render.js";
import type { InferResponse, WhatIfResponse } from "../src/types.js";
import { asResponse, fakeFetch, loadFixture, loadInput } from "./helpers.js";

const BASE = "http://service.test";
const features = loadInput<Record<string, string>>("features");
const inferReply = loadFixture<InferResponse>("infer").body;
const noop = loadFixture<WhatIfResponse>("whatif_noop");
const flip = loadFixture<WhatIfResponse>("whatif_flip");
const unknown = loadFixture<{ error: string }>("whatif_unknown");

function newSession(fetchFn: FetchLike): InterventionSession {
  const client = new InspectorClient(BASE, fetchFn);
  return new InterventionSession(client, features, panelFromInference(inferReply));
}

describe("probing with overrides", () => {
  it("a no-op probe confirms the signed decision but is marked unsigned", async () => {
    const session = newSession(fakeFetch({ "POST /whatif": noop }));
    await session.applyIntervention({});

    expect(session.panel.unsigned).toBe(true);
    expect(session.panel.decision).toBe(noop.body.decision);
    expect(session.panel.decision).toBe(session.original.decision);
    expect(session.panel.confidence).toBe(noop.body.confidence);
    // the signed original is untouched and still displayed alongside
    expect(session.original.unsigned).toBe(false);
    expect(session.original.decision).toBe(inferReply.decision);
  });

  it("applying a flip then reset returns the panel to the signed original", async () => {
    const session = newSession(fakeFetch({ "POST /whatif": flip }));
    const before = renderIntervention(session);

    await session.applyIntervention(flip.body.overrides_applied);
    expect(session.panel.decision).toBe(flip.body.decision);
    expect(session.panel.decision).not.toBe(session.original.decision);
    expect(session.panel.unsigned).toBe(true);
    expect(session.panel.overridesApplied).toEqual(flip.body.overrides_applied);
    expect(renderIntervention(session)).toMatchSnapshot();

    session.reset();
    expect(session.panel).toBe(session.original);
    expect(session.message).toBeNull();
    expect(renderIntervention(session)).toBe(before);
  });

  it("a rejected probe surfaces the service message and leaves the panel alone", async () => {
    const session = newSession(fakeFetch({ "POST /whatif": unknown }));
    await session.applyIntervention({ "odor=zz": 1 });

    expect(session.message).toBe(unknown.body.error);
    expect(session.panel).toBe(session.original);
    expect(renderIntervention(session)).toMatchSnapshot();
  });

  it("an unreachable service leaves the panel alone with a generic message", async () => {
    const session = newSession(fakeFetch({}));
    await session.applyIntervention({ "odor=f": 1 });

    expect(session.message).toBe("could not reach the record service");
    expect(session.panel).toBe(session.original);
  });
});

interface Pending {
  signal: AbortSignal | undefined;
  resolve: (r: Response) => void;
}

function deferredFetch(honorAbort: boolean): { fetchFn: FetchLike; pending: Pending[] } {
  const pending: Pending[] = [];
  const fetchFn: FetchLike = (_url, init) =>
    new Promise<Response>((resolve, reject) => {
      if (honorAbort) {
        init?.signal?.addEventListener("abort", () =>
          reject(new DOMException("request aborted", "AbortError")),
        );
      }
      pending.push({ signal: init?.signal ?? undefined, resolve });
    });
  return { fetchFn, pending };
}

describe("only one probe in flight", () => {
  it("a new apply aborts the previous request", async () => {
    const { fetchFn, pending } = deferredFetch(true);
    const session = newSession(fetchFn);

    const first = session.applyIntervention({ "odor=n": 0 });
    const second = session.applyIntervention(flip.body.overrides_applied);
    expect(pending).toHaveLength(2);
    expect(pending[0].signal?.aborted).toBe(true);
    expect(pending[1].signal?.aborted).toBe(false);

    pending[1].resolve(asResponse(flip));
    await Promise.all([first, second]);

    expect(session.panel.decision).toBe(flip.body.decision);
    expect(session.message).toBeNull();
  });

  it("a stale reply cannot overwrite a newer one even if the transport ignores aborts", async () => {
    const { fetchFn, pending } = deferredFetch(false);
    const session = newSession(fetchFn);

    const first = session.applyIntervention({});
    const second = session.applyIntervention(flip.body.overrides_applied);

    // the newer probe answers first, then the stale one trickles in
    pending[1].resolve(asResponse(flip));
    await second;
    pending[0].resolve(asResponse(noop));
    await first;

    expect(session.panel.decision).toBe(flip.body.decision);
    expect(session.panel.overridesApplied).toEqual(flip.body.overrides_applied);
  });
});
