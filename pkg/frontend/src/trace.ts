/** Pure reducer turning a stream of trace events into a view model.
 *
 * The UI never computes token counts or provenance itself; everything shown
 * comes from server payloads.
 */

import type {
  ErrorEvent,
  FinalResponseEvent,
  ToolCallEvent,
  ToolResultEvent,
  TraceEventKind,
} from './types.js';
import type { SseEvent } from './sse.js';

export interface TraceChip {
  callId: string;
  toolName: string;
  args: Record<string, unknown>;
  resultText: string | null;
  tokenCount: number | null;
  provenance: [string, string, string][];
  expanded: boolean;
}

export interface TurnView {
  chips: TraceChip[];
  answer: string | null;
  answerTokens: number | null;
  error: string | null;
  /** true once a final_response or error event has arrived */
  settled: boolean;
}

export function emptyTurn(): TurnView {
  return { chips: [], answer: null, answerTokens: null, error: null, settled: false };
}

export function applyEvent(turn: TurnView, kind: TraceEventKind, data: unknown): TurnView {
  const next: TurnView = { ...turn, chips: turn.chips.slice() };
  switch (kind) {
    case 'tool_call': {
      const d = data as ToolCallEvent;
      next.chips.push({
        callId: d.id,
        toolName: d.tool_name,
        args: d.arguments,
        resultText: null,
        tokenCount: null,
        provenance: [],
        expanded: false,
      });
      break;
    }
    case 'tool_result': {
      const d = data as ToolResultEvent;
      const i = next.chips.findIndex((c) => c.callId === d.id && c.resultText === null);
      if (i === -1) break; // result without a call: ignore rather than crash
      next.chips[i] = {
        ...next.chips[i],
        resultText: d.text,
        tokenCount: d.token_count,
        provenance: d.provenance ?? [],
      };
      break;
    }
    case 'final_response': {
      const d = data as FinalResponseEvent;
      next.answer = d.text;
      next.answerTokens = d.token_count;
      next.settled = true;
      break;
    }
    case 'error': {
      const d = data as ErrorEvent;
      next.error = d.message;
      next.settled = true;
      break;
    }
  }
  return next;
}

/** Fold raw SSE events (JSON data payloads) into a turn view. */
export function reduceTurn(events: SseEvent[], initial?: TurnView): TurnView {
  let turn = initial ?? emptyTurn();
  for (const e of events) {
    turn = applyEvent(turn, e.event as TraceEventKind, JSON.parse(e.data));
  }
  return turn;
}

/** Split a /compare stream into per-column event lists by the column tag. */
export function splitColumns(events: SseEvent[]): [SseEvent[], SseEvent[]] {
  const columns: [SseEvent[], SseEvent[]] = [[], []];
  for (const e of events) {
    const col = (JSON.parse(e.data) as { column?: number }).column ?? 0;
    columns[col === 1 ? 1 : 0].push(e);
  }
  return columns;
}

export function toggleChip(turn: TurnView, index: number): TurnView {
  const chips = turn.chips.slice();
  if (index < 0 || index >= chips.length) return turn;
  chips[index] = { ...chips[index], expanded: !chips[index].expanded };
  return { ...turn, chips };
}
