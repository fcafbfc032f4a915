/** HTML-string renderers for turn views, source panels, and judgment logs.
 *
 * Kept DOM-free so the whole presentation layer is testable under vitest;
 * main.ts owns the innerHTML assignment and event delegation.
 */

import type { TraceChip, TurnView } from './trace.js';
import type { DocumentView, Judgment } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function provenanceHref(db: string, title: string): string {
  return `/corpus/docs/${encodeURIComponent(db)}/${encodeURIComponent(title)}`;
}

function renderChip(chip: TraceChip, index: number): string {
  const state = chip.resultText === null ? 'pending' : 'done';
  const open = chip.expanded ? ' open' : '';
  const args = escapeHtml(JSON.stringify(chip.args));
  const links = chip.provenance
    .map(
      ([db, title, section]) =>
        `<a class="prov" data-db="${escapeHtml(db)}" data-title="${escapeHtml(title)}" ` +
        `href="${provenanceHref(db, title)}">${escapeHtml(title)} § ${escapeHtml(section)}</a>`,
    )
    .join('');
  const body =
    chip.resultText === null
      ? '<em>running…</em>'
      : `<pre>${escapeHtml(chip.resultText)}</pre>` +
        (chip.tokenCount !== null ? `<span class="tokens">${chip.tokenCount} tokens</span>` : '') +
        (links ? `<div class="prov-links">${links}</div>` : '');
  return (
    `<details class="chip ${state}" data-chip="${index}"${open}>` +
    `<summary>${escapeHtml(chip.toolName)}<code>${args}</code></summary>` +
    `<div class="chip-body">${body}</div></details>`
  );
}

/** One assistant bubble: trace chips (collapsed by default) then the answer. */
export function renderTurn(turn: TurnView): string {
  const chips = turn.chips.map(renderChip).join('');
  const answer =
    turn.answer !== null
      ? `<div class="answer">${escapeHtml(turn.answer)}` +
        (turn.answerTokens !== null
          ? `<span class="tokens">${turn.answerTokens} tokens</span>`
          : '') +
        '</div>'
      : '';
  const error =
    turn.error !== null ? `<div class="error-banner">${escapeHtml(turn.error)}</div>` : '';
  const pending = !turn.settled && turn.answer === null && turn.error === null;
  return (
    `<div class="turn${pending ? ' pending' : ''}">` +
    (chips ? `<div class="chips">${chips}</div>` : '') +
    answer +
    error +
    '</div>'
  );
}

/** The document-source panel behind provenance links. */
export function renderDocument(doc: DocumentView, highlightSection?: string): string {
  const sections = doc.sections
    .map((s) => {
      const hl = s.name === highlightSection ? ' highlight' : '';
      return (
        `<section class="doc-section${hl}"><h3>${escapeHtml(s.name)}</h3>` +
        `<p>${escapeHtml(s.body)}</p>` +
        `<span class="tokens">${s.token_count} tokens</span></section>`
      );
    })
    .join('');
  return (
    `<article class="doc"><h2>${escapeHtml(doc.title)} <small>[${escapeHtml(doc.db_name)}]</small></h2>` +
    `<p class="abstract">${escapeHtml(doc.abstract)}</p>${sections}</article>`
  );
}

export function renderCompare(left: TurnView, right: TurnView, labels: [string, string]): string {
  const col = (view: TurnView, label: string, i: number) =>
    `<div class="column" data-column="${i}"><h2>${escapeHtml(label)}</h2>${renderTurn(view)}</div>`;
  return `<div class="compare">${col(left, labels[0], 0)}${col(right, labels[1], 1)}</div>`;
}

export function exportJudgments(log: Judgment[]): string {
  return JSON.stringify(log, null, 2) + '\n';
}
