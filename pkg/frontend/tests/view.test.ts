import { describe, expect, it } from "vitest";

import { InspectorClient } from "../src/api.js";
import { renderInspector } from "../src/render.js";
import { loadBomView } from "../src/view.js";
import type { EnvelopeDoc, HealthResponse, InferResponse } from "../src/types.js";
import { fakeFetch, loadFixture, loadInput, type SeenRequest } from "./helpers.js";

const BASE = "http://service.test";

// Independent decode path so the assertions do not reuse the module under test.
function payloadOf(envelope: EnvelopeDoc): any {
  return JSON.parse(Buffer.from(envelope.payload, "base64").toString("utf8"));
}

const health = loadFixture<HealthResponse>("health").body;
const bomTbom = loadFixture<EnvelopeDoc>("bom_tbom");
const inferReply = loadFixture<InferResponse>("infer").body;
const bomIbom = loadFixture<EnvelopeDoc>("bom_ibom");

describe("loading a training record", () => {
  it("shows the five fold accuracies with a verified badge", async () => {
    const seen: SeenRequest[] = [];
    const client = new InspectorClient(
      BASE,
      fakeFetch(
        {
          [`GET /bom/${health.tbom_link}`]: bomTbom,
          "POST /verify": loadFixture("verify_tbom"),
        },
        seen,
      ),
    );

    const view = await loadBomView(client, health.tbom_link);

    expect(view.badge).toBe("verified");
    expect(view.error).toBeNull();
    expect(view.bom?.kind).toBe("training");
    if (view.bom?.kind !== "training") throw new Error("unreachable");

    const recorded = payloadOf(bomTbom.body);
    expect(view.bom.foldAccuracies).toHaveLength(5);
    expect(view.bom.foldAccuracies).toEqual(recorded.performance_metrics.cv.per_fold_accuracy);
    expect(view.bom.finalTest.accuracy).toBe(recorded.performance_metrics.final_test.accuracy);
    expect(view.bom.hyperparameters).toEqual(recorded.training_methodology.hyperparameters);
    expect(view.bom.environment.os).toBe(recorded.environment.os);

    // what was verified is exactly what was fetched
    expect(seen).toHaveLength(2);
    expect(seen[1]).toEqual({ method: "POST", path: "/verify", body: bomTbom.body });

    expect(renderInspector(view)).toMatchSnapshot();
  });

  it("marks a tampered envelope as failed, quoting the service's reasons", async () => {
    const tampered = loadInput<EnvelopeDoc>("tampered_envelope");
    const verdict = loadFixture<{ failures: { stage: string; message: string }[] }>(
      "verify_tampered",
    );
    const client = new InspectorClient(BASE, fakeFetch({ "POST /verify": verdict }));

    const view = await loadBomView(client, tampered);

    expect(view.badge).toBe("failed");
    expect(view.failures).toEqual(verdict.body.failures);
    expect(view.failures.length).toBeGreaterThan(0);
    // the record is still displayed so the user can see what was claimed
    expect(view.bom?.kind).toBe("training");
    expect(renderInspector(view)).toMatchSnapshot();
  });

  it("never judges an envelope itself: the badge restates whatever the service said", async () => {
    // genuine envelope, but the service says failed
    const saidFailed = new InspectorClient(
      BASE,
      fakeFetch({ "POST /verify": loadFixture("verify_tampered") }),
    );
    expect((await loadBomView(saidFailed, bomTbom.body)).badge).toBe("failed");

    // tampered envelope, but the service says pass
    const saidPass = new InspectorClient(
      BASE,
      fakeFetch({ "POST /verify": loadFixture("verify_tbom") }),
    );
    const tampered = loadInput<EnvelopeDoc>("tampered_envelope");
    expect((await loadBomView(saidPass, tampered)).badge).toBe("verified");
  });
});

describe("loading a decision record", () => {
  it("shows the decision, confidence, certainty and pathway under a verified badge", async () => {
    const client = new InspectorClient(
      BASE,
      fakeFetch({
        [`GET /bom/${inferReply.payload_digest}`]: bomIbom,
        "POST /verify": loadFixture("verify_ibom"),
      }),
    );

    const view = await loadBomView(client, inferReply.payload_digest);

    expect(view.badge).toBe("verified");
    expect(view.bom?.kind).toBe("inference");
    if (view.bom?.kind !== "inference") throw new Error("unreachable");

    // the signed record restates what the service answered at decision time
    expect(view.bom.decision).toBe(inferReply.decision);
    expect(view.bom.confidence).toBe(inferReply.confidence);
    expect(view.bom.certainty).toBe(inferReply.certainty_level);
    expect(view.bom.inferenceId).toBe(inferReply.inference_id);
    expect(view.bom.trainingLink).toBe(health.tbom_link);
    expect(view.bom.pathway.map((s) => s.step)).toEqual([
      "decode-input",
      "verify-model",
      "encode",
      "predict",
    ]);
    expect(view.bom.contributions.length).toBeGreaterThan(0);

    expect(renderInspector(view)).toMatchSnapshot();
  });
});

describe("failure handling", () => {
  it("an unreachable service leaves the badge unchecked with an error banner", async () => {
    const client = new InspectorClient(BASE, fakeFetch({}));
    const view = await loadBomView(client, health.tbom_link);

    expect(view.badge).toBe("unchecked");
    expect(view.error).not.toBeNull();
    expect(view.bom).toBeNull();
    expect(renderInspector(view)).toMatchSnapshot();
  });

  it("an unknown digest surfaces the service's 404 message, badge unchecked", async () => {
    const missing = loadFixture<{ error: string }>("bom_missing");
    const digest = "0".repeat(64);
    const client = new InspectorClient(BASE, fakeFetch({ [`GET /bom/${digest}`]: missing }));

    const view = await loadBomView(client, digest);

    expect(view.badge).toBe("unchecked");
    expect(view.error).toBe(missing.body.error);
    expect(view.bom).toBeNull();
  });

  it("a record fetched but not checkable is shown with badge unchecked", async () => {
    // /bom answers, /verify is down
    const client = new InspectorClient(
      BASE,
      fakeFetch({ [`GET /bom/${health.tbom_link}`]: bomTbom }),
    );

    const view = await loadBomView(client, health.tbom_link);

    expect(view.badge).toBe("unchecked");
    expect(view.error).not.toBeNull();
    expect(view.bom?.kind).toBe("training");
  });
});
