/** HTML renderers. Pure string builders over view models, no DOM access,
 * so snapshot tests can pin the exact markup. Every number in the output is
 * a string that arrived from the service. */

import type { ContributionView } from "./contributions.js";
import type { PredictionPanel } from "./intervention.js";
import type { InferenceView, InspectorView, TrainingView } from "./view.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const esc = escapeHtml;

export function renderBadge(badge: InspectorView["badge"]): string {
  return `<span class="badge badge-${badge}">${badge}</span>`;
}

function row(label: string, value: string | number): string {
  return `<tr><th>${esc(label)}</th><td>${esc(String(value))}</td></tr>`;
}

function renderTraining(view: TrainingView): string {
  const folds = view.foldAccuracies
    .map((acc, i) => `<li>fold ${i + 1}: <code>${esc(acc)}</code></li>`)
    .join("");
  const hyper = Object.entries(view.hyperparameters)
    .map(([key, value]) => row(key, value))
    .join("");
  const versions = Object.entries(view.environment.componentVersions)
    .map(([name, version]) => `${esc(name)} ${esc(version)}`)
    .join(", ");
  return [
    `<section class="bom bom-training">`,
    `<h2>${esc(view.projectName)} <small>training record</small></h2>`,
    `<p>${esc(view.purpose)}</p>`,
    `<h3>cross-validation accuracy</h3>`,
    `<ul class="folds">${folds}</ul>`,
    `<p>mean <code>${esc(view.meanAccuracy)}</code>, std <code>${esc(view.stdAccuracy)}</code></p>`,
    `<h3>held-out test</h3>`,
    `<table>`,
    row("accuracy", view.finalTest.accuracy),
    row("sensitivity", view.finalTest.sensitivity),
    row("specificity", view.finalTest.specificity),
    row("true positives", view.finalTest.truePositives),
    row("true negatives", view.finalTest.trueNegatives),
    row("false positives", view.finalTest.falsePositives),
    row("false negatives", view.finalTest.falseNegatives),
    `</table>`,
    `<h3>hyperparameters</h3>`,
    `<table>${hyper}</table>`,
    `<h3>environment</h3>`,
    `<p>${esc(view.environment.os)} on ${esc(view.environment.cpu)}; toolkit ${esc(view.environment.toolkitVersion)}; ${versions}</p>`,
    `<p>dataset <code>${esc(view.datasetName)}</code> digest <code>${esc(view.datasetDigest)}</code></p>`,
    `<p>model digest <code>${esc(view.modelDigest)}</code></p>`,
    `</section>`,
  ].join("\n");
}

function renderInference(view: InferenceView): string {
  const pathway = view.pathway
    .map(
      (stage) =>
        `<li><strong>${esc(stage.step)}</strong> ` +
        `<code>${esc(stage.inputDigest.slice(0, 12))}</code> to ` +
        `<code>${esc(stage.outputDigest.slice(0, 12))}</code></li>`,
    )
    .join("");
  return [
    `<section class="bom bom-inference">`,
    `<h2>decision <small>${esc(view.inferenceId)}</small></h2>`,
    `<table>`,
    row("decision", view.decision),
    row("confidence", view.confidence),
    row("certainty", view.certainty),
    row("distance from threshold", view.distanceFromThreshold),
    row("threshold", view.threshold),
    row("issued at", view.timestamp),
    row("training record link", view.trainingLink),
    `</table>`,
    `<h3>decision pathway</h3>`,
    `<ol class="pathway">${pathway}</ol>`,
    `</section>`,
  ].join("\n");
}

export function renderInspector(view: InspectorView): string {
  const parts: string[] = [`<div class="inspector">`, renderBadge(view.badge)];
  if (view.error !== null) {
    parts.push(`<div class="banner banner-error">${esc(view.error)}</div>`);
  }
  if (view.failures.length > 0) {
    const items = view.failures
      .map((f) => `<li><strong>${esc(f.stage)}</strong>: ${esc(f.message)}</li>`)
      .join("");
    parts.push(`<ul class="failures">${items}</ul>`);
  }
  if (view.keyidUsed !== null) {
    parts.push(`<p class="keyid">checked against key <code>${esc(view.keyidUsed)}</code></p>`);
  }
  if (view.bom !== null) {
    parts.push(view.bom.kind === "training" ? renderTraining(view.bom) : renderInference(view.bom));
  }
  parts.push(`</div>`);
  return parts.join("\n");
}

export function renderContributionChart(view: ContributionView): string {
  if (view.kind === "placeholder") {
    return `<div class="contributions placeholder">${esc(view.message)}</div>`;
  }
  const bars = view.bars
    .map(
      (bar) =>
        `<div class="bar-row">` +
        `<span class="concept">${esc(bar.concept)}</span>` +
        `<span class="bar bar-${bar.side}" style="width:${bar.widthPercent}%"></span>` +
        `<code class="value">${esc(bar.contribution)}</code>` +
        `</div>`,
    )
    .join("\n");
  return [
    `<div class="contributions" data-shown="${view.shown}" data-total="${view.total}">`,
    `<p class="axis">toward edible &larr; | &rarr; toward poisonous</p>`,
    bars,
    `</div>`,
  ].join("\n");
}

function renderPanelBody(panel: PredictionPanel, heading: string): string {
  const marker = panel.unsigned ? ` <span class="unsigned">unsigned</span>` : "";
  const overrides =
    panel.overridesApplied === null
      ? ""
      : `<p class="overrides">overrides: <code>${esc(JSON.stringify(panel.overridesApplied))}</code></p>`;
  return [
    `<div class="panel ${panel.unsigned ? "panel-unsigned" : "panel-signed"}">`,
    `<h3>${esc(heading)}${marker}</h3>`,
    `<table>`,
    row("decision", panel.decision),
    row("confidence", panel.confidence),
    row("certainty", panel.certainty),
    row("p(edible)", panel.probabilities.edible),
    row("p(poisonous)", panel.probabilities.poisonous),
    `</table>`,
    overrides,
    `</div>`,
  ].join("\n");
}

/** The intervention area: the signed original always on the left, the
 * current probe (when one is active) on the right. */
export function renderIntervention(session: {
  original: PredictionPanel;
  panel: PredictionPanel;
  message: string | null;
}): string {
  const parts: string[] = [`<div class="intervention">`];
  parts.push(renderPanelBody(session.original, "signed decision"));
  if (session.panel !== session.original) {
    parts.push(renderPanelBody(session.panel, "what-if"));
  }
  if (session.message !== null) {
    parts.push(`<div class="banner banner-error">${esc(session.message)}</div>`);
  }
  parts.push(`</div>`);
  return parts.join("\n");
}
