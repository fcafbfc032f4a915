/** Browser wiring: DOM event delegation over the pure render/reduce layer. */

import { ChatApi } from './api.js';
import { JudgmentLog } from './judgment.js';
import { exportJudgments, renderCompare, renderDocument, renderTurn } from './render.js';
import { applyEvent, emptyTurn, toggleChip, TurnView } from './trace.js';
import type { TraceEventKind } from './types.js';

const api = new ChatApi('');
const log = new JudgmentLog();

const $ = (id: string) => document.getElementById(id) as HTMLElement;

interface ChatState {
  sessionId: string | null;
  turns: TurnView[];
}

const chat: ChatState = { sessionId: null, turns: [] };
let compareViews: [TurnView, TurnView] = [emptyTurn(), emptyTurn()];
let compareConfigs: [string, string] = ['', ''];
let comparePrompt = '';

function redrawChat(): void {
  $('chat-log').innerHTML = chat.turns.map(renderTurn).join('');
}

function redrawCompare(): void {
  $('compare-log').innerHTML = renderCompare(compareViews[0], compareViews[1], compareConfigs);
}

async function sendChat(): Promise<void> {
  const input = $('chat-input') as HTMLInputElement;
  const text = input.value.trim();
  if (!text) return;
  input.disabled = true;
  if (chat.sessionId === null) {
    chat.sessionId = await api.createSession(
      ($('config-select') as HTMLSelectElement).value,
    );
  }
  let turn = emptyTurn();
  chat.turns.push(turn);
  const index = chat.turns.length - 1;
  try {
    await api.sendMessage(chat.sessionId, text, (e) => {
      turn = applyEvent(turn, e.event as TraceEventKind, JSON.parse(e.data));
      chat.turns[index] = turn;
      redrawChat();
    });
  } catch (err) {
    chat.turns[index] = { ...turn, error: String(err), settled: true };
    redrawChat();
  } finally {
    input.disabled = false; // error banners re-enable input too
    input.value = '';
    input.focus();
  }
}

async function sendCompare(): Promise<void> {
  const input = $('compare-input') as HTMLInputElement;
  const text = input.value.trim();
  if (!text) return;
  comparePrompt = text;
  compareConfigs = [
    ($('config-a') as HTMLSelectElement).value,
    ($('config-b') as HTMLSelectElement).value,
  ];
  compareViews = [emptyTurn(), emptyTurn()];
  redrawCompare();
  await api.compare(compareConfigs, text, (e) => {
    const data = JSON.parse(e.data) as { column?: number };
    const col = data.column === 1 ? 1 : 0;
    compareViews[col] = applyEvent(compareViews[col], e.event as TraceEventKind, data);
    redrawCompare();
  });
}

async function openSource(db: string, title: string): Promise<void> {
  const doc = await api.getDocument(db, title);
  $('source-panel').innerHTML = renderDocument(doc);
  $('source-panel').classList.add('open');
}

function judge(preferred: 0 | 1 | 'draw'): void {
  if (!comparePrompt) return;
  log.add(comparePrompt, compareConfigs, preferred);
  $('judgment-count').textContent = String(log.size);
}

function downloadJudgments(): void {
  const blob = new Blob([exportJudgments(log.all())], { type: 'application/json' });
  const a = document.createElement('a');
  a.href = URL.createObjectURL(blob);
  a.download = 'judgments.json';
  a.click();
  URL.revokeObjectURL(a.href);
}

document.addEventListener('DOMContentLoaded', () => {
  $('chat-send').addEventListener('click', () => void sendChat());
  ($('chat-input') as HTMLInputElement).addEventListener('keydown', (e) => {
    if (e.key === 'Enter') void sendChat();
  });
  $('compare-send').addEventListener('click', () => void sendCompare());
  $('judge-a').addEventListener('click', () => judge(0));
  $('judge-b').addEventListener('click', () => judge(1));
  $('judge-draw').addEventListener('click', () => judge('draw'));
  $('judge-export').addEventListener('click', downloadJudgments);

  // delegated: provenance links open the source panel, summaries toggle chips
  document.body.addEventListener('click', (e) => {
    const target = e.target as HTMLElement;
    const prov = target.closest('a.prov') as HTMLElement | null;
    if (prov) {
      e.preventDefault();
      void openSource(prov.dataset.db ?? '', prov.dataset.title ?? '');
      return;
    }
    const summary = target.closest('details.chip > summary');
    if (summary) {
      e.preventDefault();
      const details = summary.parentElement as HTMLElement;
      const index = Number(details.dataset.chip);
      const turnEl = details.closest('.column');
      if (turnEl) {
        const col = Number((turnEl as HTMLElement).dataset.column) === 1 ? 1 : 0;
        compareViews[col] = toggleChip(compareViews[col], index);
        redrawCompare();
      } else {
        const i = chat.turns.length - 1;
        if (i >= 0) {
          chat.turns[i] = toggleChip(chat.turns[i], index);
          redrawChat();
        }
      }
    }
  });
});
