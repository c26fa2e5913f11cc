// HTML string builders. Items render in the exact order the server sent
// them (the server ranks by utility; the client never reorders).

import type {
  ClaimDetail,
  EvidenceRecord,
  ProvenanceEntry,
  QueueItem,
  VerifyStatus,
} from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const VERDICT_GLYPH: Record<number, string> = { 1: "+1", 0: "0", [-1]: "-1" };

export function renderQueue(items: QueueItem[], selected?: string): string {
  if (items.length === 0) {
    return `<p class="empty">Queue empty — nothing awaiting arbitration.</p>`;
  }
  const rows = items
    .map((item) => {
      const c = item.components;
      const cls = item.claim_id === selected ? ` class="selected"` : "";
      return (
        `<tr${cls} data-claim="${escapeHtml(item.claim_id)}" data-item="${escapeHtml(item.item_id)}">` +
        `<td>${escapeHtml(item.item_id)}</td>` +
        `<td class="num">${item.utility.toFixed(3)}</td>` +
        `<td class="num">${c.unc.toFixed(2)}</td>` +
        `<td class="num">${c.conflict.toFixed(2)}</td>` +
        `<td class="num">${c.impact.toFixed(2)}</td>` +
        `<td>${escapeHtml(item.query.type)}</td>` +
        `<td>${escapeHtml(item.claim_text)}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="queue"><thead><tr>` +
    `<th>item</th><th>utility</th><th>unc</th><th>conflict</th><th>impact</th>` +
    `<th>query</th><th>claim</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderEvidence(evidence: EvidenceRecord[]): string {
  if (evidence.length === 0) {
    return `<p class="empty">No evidence recorded yet.</p>`;
  }
  const rows = evidence
    .map(
      (ev) =>
        `<tr><td>${ev.round}</td><td>${escapeHtml(ev.role)}</td>` +
        `<td class="verdict v${ev.verdict}">${VERDICT_GLYPH[ev.verdict]}</td>` +
        `<td class="num">${ev.confidence.toFixed(2)}</td>` +
        `<td>${ev.candidate === null ? "—" : escapeHtml(ev.candidate)}</td>` +
        `<td>${ev.probed ? "probe" : "out of scope"}</td></tr>`,
    )
    .join("");
  return (
    `<table class="evidence"><thead><tr>` +
    `<th>round</th><th>role</th><th>verdict</th><th>confidence</th>` +
    `<th>candidate</th><th>source</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderProvenance(entries: ProvenanceEntry[]): string {
  const rows = entries
    .map(
      (e) =>
        `<li><span class="seq">#${e.seq}</span> ` +
        `<span class="actor ${escapeHtml(e.actor)}">${escapeHtml(e.actor)}</span> ` +
        `${escapeHtml(e.action)} (v${e.prior_version} → v${e.new_version})</li>`,
    )
    .join("");
  return `<ol class="provenance">${rows}</ol>`;
}

export function renderClaimDetail(detail: ClaimDetail): string {
  const claim = detail.claim;
  const belief =
    detail.belief === null || detail.belief === undefined
      ? "not yet fused"
      : detail.belief.toFixed(4);
  const neighbors = detail.dependency_neighbors.length
    ? detail.dependency_neighbors.map((n) => `<code>${escapeHtml(n)}</code>`).join(", ")
    : "none";
  return (
    `<section class="claim-detail" data-claim="${escapeHtml(claim.claim_id)}">` +
    `<h3>${escapeHtml(detail.claim_text)}</h3>` +
    `<dl>` +
    `<dt>claim</dt><dd><code>${escapeHtml(claim.claim_id)}</code> (${escapeHtml(claim.claim_type)})</dd>` +
    `<dt>asserted value</dt><dd>${escapeHtml(claim.asserted_value)}</dd>` +
    `<dt>status</dt><dd class="status ${escapeHtml(claim.status)}">${escapeHtml(claim.status)}</dd>` +
    `<dt>belief</dt><dd>${belief}</dd>` +
    `<dt>depends with</dt><dd>${neighbors}</dd>` +
    `</dl>` +
    `<h4>Evidence by role</h4>${renderEvidence(detail.evidence)}` +
    `<h4>Provenance (latest)</h4>${renderProvenance(detail.provenance)}` +
    `</section>`
  );
}

export function renderAnswerControls(item: QueueItem): string {
  if (item.query.type === "binary") {
    return (
      `<div class="answer" data-item="${escapeHtml(item.item_id)}">` +
      `<button data-answer="confirm">Confirm</button>` +
      `<button data-answer="reject">Reject</button>` +
      `</div>`
    );
  }
  const options = (item.query.options ?? [])
    .map((o) => `<button data-answer="select" data-value="${escapeHtml(o)}">${escapeHtml(o)}</button>`)
    .join("");
  return `<div class="answer" data-item="${escapeHtml(item.item_id)}">${options}</div>`;
}

export function renderVerifyBanner(status: VerifyStatus, reverifyNote?: string): string {
  const state = status.running
    ? `<span class="running">verification running…</span>`
    : `<span class="idle">idle — ${status.rounds} round(s), ` +
      `${status.converged ? "converged" : "budget reached"}</span>`;
  const note = reverifyNote ? ` <span class="note">${escapeHtml(reverifyNote)}</span>` : "";
  return `<div class="banner">${state}${note}</div>`;
}

export function renderError(message: string): string {
  return `<div class="error">${escapeHtml(message)}</div>`;
}
