// Pure HTML-string renderers. Everything user- or service-originated passes
// through escapeHtml; fact strings are rendered verbatim (escaped only), so
// what the provenance panel shows is exactly what the service returned.

import type { ChatTurn, NeighborEntry, NodeResponse, UserProfile } from "./types.js";
import type { ChatError } from "./state.js";
import { ALLERGEN_CATEGORIES, DIETS } from "./profile.js";

const ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => ESCAPES[ch] as string);
}

export function unescapeHtml(text: string): string {
  return text
    .replace(/&lt;/g, "<")
    .replace(/&gt;/g, ">")
    .replace(/&quot;/g, '"')
    .replace(/&#39;/g, "'")
    .replace(/&amp;/g, "&");
}

export function renderTurn(turn: ChatTurn, index: number): string {
  const badge = turn.zeroRetrieval
    ? '<span class="badge zero-retrieval" title="no fact cleared the retrieval cutoff">no knowledge retrieved</span>'
    : "";
  const facts = turn.facts
    .map(
      (fact) => `
      <li class="fact">
        <span class="fact-score">${fact.score.toFixed(3)}</span>${fact.seeded ? '<span class="fact-seeded" title="included by keyword seeding">seeded</span>' : ""}
        <span class="fact-text">${escapeHtml(fact.text)}</span>
      </li>`,
    )
    .join("");
  const provenance = turn.facts.length
    ? `
      <details class="provenance" open>
        <summary>${turn.facts.length} cited fact${turn.facts.length === 1 ? "" : "s"}</summary>
        <ul>${facts}</ul>
      </details>`
    : "";
  return `
    <article class="turn" data-turn="${index}">
      <div class="question">${escapeHtml(turn.question)}</div>
      <div class="answer">${badge}<p>${escapeHtml(turn.answer)}</p>${provenance}</div>
    </article>`;
}

export function renderTurns(turns: ChatTurn[]): string {
  return turns.map((turn, i) => renderTurn(turn, i)).join("\n");
}

export function renderError(error: ChatError | null): string {
  if (error === null) return "";
  return `
    <div class="error-banner" role="alert">
      <span>Request failed: ${escapeHtml(error.message)}</span>
      <button type="button" data-action="retry">retry</button>
    </div>`;
}

export function renderPending(question: string): string {
  return `<div class="pending">asking: ${escapeHtml(question)}…</div>`;
}

function renderNeighbor(entry: NeighborEntry): string {
  const arrow = entry.direction === "out" ? "→" : "←";
  const props = Object.entries(entry.edge_props)
    .map(([k, v]) => `${escapeHtml(k)}=${escapeHtml(String(v))}`)
    .join(", ");
  return `
    <li class="neighbor">
      <span class="direction">${arrow}</span>
      <a href="#" data-node-id="${escapeHtml(entry.node.id)}">
        <span class="kind">${escapeHtml(entry.node.kind)}</span>
        ${escapeHtml(entry.node.name)}
      </a>
      ${props ? `<span class="edge-props">${props}</span>` : ""}
    </li>`;
}

export function renderNodePanel(response: NodeResponse | null, lookupId: string): string {
  if (response === null) {
    return `
      <div class="node-panel not-found">
        <p>No node with id <code>${escapeHtml(lookupId)}</code>.</p>
      </div>`;
  }
  const { node, neighbors } = response;
  const props = Object.entries(node.props)
    .map(
      ([k, v]) =>
        `<li><code>${escapeHtml(k)}</code> = ${escapeHtml(String(v))}</li>`,
    )
    .join("");
  const groups = Object.entries(neighbors)
    .map(
      ([kind, entries]) => `
      <section class="relation-group">
        <h4>${escapeHtml(kind)} (${entries.length})</h4>
        <ul>${entries.map(renderNeighbor).join("")}</ul>
      </section>`,
    )
    .join("");
  return `
    <div class="node-panel" data-node-id="${escapeHtml(node.id)}">
      <h3><span class="kind">${escapeHtml(node.kind)}</span> ${escapeHtml(node.name)}</h3>
      ${props ? `<ul class="props">${props}</ul>` : ""}
      ${groups || "<p>No relationships.</p>"}
    </div>`;
}

export function renderProfilePanel(profile: UserProfile): string {
  const diets = DIETS.map((diet) => {
    const checked = profile.diets.includes(diet) ? " checked" : "";
    return `
      <label class="choice">
        <input type="checkbox" data-diet="${diet}"${checked}> ${diet}
      </label>`;
  }).join("");
  const allergens = ALLERGEN_CATEGORIES.map((category) => {
    const checked = profile.excludedAllergens.includes(category.id)
      ? " checked"
      : "";
    return `
      <label class="choice">
        <input type="checkbox" data-allergen="${category.id}"${checked}>
        ${category.id}: ${escapeHtml(category.name)}
      </label>`;
  }).join("");
  return `
    <section class="profile-group"><h4>Diets</h4>${diets}</section>
    <section class="profile-group"><h4>Exclude allergens</h4>${allergens}</section>`;
}

/** The fact strings as shown in a rendered turn, unescaped back to their
 * original bytes; used to verify provenance integrity. */
export function extractRenderedFacts(html: string): string[] {
  const out: string[] = [];
  const pattern = /<span class="fact-text">([\s\S]*?)<\/span>/g;
  let match: RegExpExecArray | null;
  while ((match = pattern.exec(html)) !== null) {
    out.push(unescapeHtml(match[1] as string));
  }
  return out;
}
