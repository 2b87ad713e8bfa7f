// Browser wiring. All logic lives in the tested modules; this file only
// moves values between form controls and renderers.

import { InspectorClient } from "./api.js";
import { renderContributions } from "./contributions.js";
import { InterventionSession, panelFromInference } from "./intervention.js";
import { renderContributionChart, renderInspector, renderIntervention } from "./render.js";
import { loadBomView } from "./view.js";
import type { EnvelopeDoc } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const apiBase = el<HTMLInputElement>("api-base");
const digestInput = el<HTMLInputElement>("digest");
const envelopeInput = el<HTMLTextAreaElement>("envelope");
const recordOut = el<HTMLDivElement>("record");
const chartOut = el<HTMLDivElement>("chart");
const featuresInput = el<HTMLTextAreaElement>("features");
const overridesInput = el<HTMLTextAreaElement>("overrides");
const whatifOut = el<HTMLDivElement>("whatif");

function client(): InspectorClient {
  return new InspectorClient(apiBase.value.trim());
}

let session: InterventionSession | null = null;

function drawSession(): void {
  if (session === null) return;
  whatifOut.innerHTML = renderIntervention(session);
  if (session.panel.contributions !== null) {
    chartOut.innerHTML = renderContributionChart(renderContributions(session.panel.contributions));
  }
}

el<HTMLButtonElement>("load").addEventListener("click", async () => {
  const pasted = envelopeInput.value.trim();
  const ref: string | EnvelopeDoc = pasted !== "" ? JSON.parse(pasted) : digestInput.value.trim();
  const view = await loadBomView(client(), ref);
  recordOut.innerHTML = renderInspector(view);
  chartOut.innerHTML =
    view.bom !== null && view.bom.kind === "inference"
      ? renderContributionChart(renderContributions(view.bom.contributions))
      : "";
});

el<HTMLButtonElement>("decide").addEventListener("click", async () => {
  const features = JSON.parse(featuresInput.value) as Record<string, string>;
  const c = client();
  const response = await c.infer(features);
  session = new InterventionSession(c, features, panelFromInference(response));
  const view = await loadBomView(c, response.envelope);
  recordOut.innerHTML = renderInspector(view);
  if (view.bom !== null && view.bom.kind === "inference") {
    chartOut.innerHTML = renderContributionChart(renderContributions(view.bom.contributions));
  }
  drawSession();
});

el<HTMLButtonElement>("apply").addEventListener("click", async () => {
  if (session === null) return;
  await session.applyIntervention(JSON.parse(overridesInput.value) as Record<string, number>);
  drawSession();
});

el<HTMLButtonElement>("reset").addEventListener("click", () => {
  session?.reset();
  drawSession();
});
