import { describe, expect, it } from 'vitest';

import { emptyTurn, reduceTurn, splitColumns, toggleChip } from '../src/trace.js';
import { BERYLLIUM_ANSWER, berylliumTurnEvents } from './fixtures.js';

describe('reduceTurn', () => {
  it('builds four chips and the final answer from the walkthrough stream', () => {
    const turn = reduceTurn(berylliumTurnEvents());
    expect(turn.chips).toHaveLength(4);
    expect(turn.chips.map((c) => c.toolName)).toEqual([
      'bm25_search',
      'keyword_search',
      'read_general',
      'qa_specific',
    ]);
    expect(turn.answer).toBe(BERYLLIUM_ANSWER);
    expect(turn.answerTokens).toBe(38);
    expect(turn.settled).toBe(true);
    expect(turn.error).toBeNull();
  });

  it('pairs results with their calls by id and keeps provenance', () => {
    const turn = reduceTurn(berylliumTurnEvents());
    const search = turn.chips[0];
    expect(search.resultText).toContain('Summary:');
    expect(search.tokenCount).toBe(120);
    expect(search.provenance).toEqual([
      ['chemical', 'Beryllium, elemental', 'Human Health Effects-Symptoms'],
    ]);
    expect(turn.chips[1].provenance).toEqual([]);
  });

  it('is pending until the stream settles', () => {
    const events = berylliumTurnEvents();
    const partial = reduceTurn(events.slice(0, 3));
    expect(partial.settled).toBe(false);
    expect(partial.chips).toHaveLength(2);
    expect(partial.chips[1].resultText).toBeNull();
  });

  it('records error events and settles the turn', () => {
    const turn = reduceTurn([
      { event: 'error', data: JSON.stringify({ message: 'backend failed' }) },
    ]);
    expect(turn.error).toBe('backend failed');
    expect(turn.settled).toBe(true);
    expect(turn.answer).toBeNull();
  });

  it('ignores a result without a matching call instead of crashing', () => {
    const turn = reduceTurn([
      {
        event: 'tool_result',
        data: JSON.stringify({ id: 'ghost', tool_name: 'x', text: '', token_count: 0, provenance: [] }),
      },
    ]);
    expect(turn.chips).toHaveLength(0);
  });

  it('does not mutate the previous view', () => {
    const before = emptyTurn();
    reduceTurn(berylliumTurnEvents(), before);
    expect(before.chips).toHaveLength(0);
    expect(before.answer).toBeNull();
  });
});

describe('splitColumns', () => {
  it('routes events to columns by tag, preserving order', () => {
    const merged = [...berylliumTurnEvents(0), ...berylliumTurnEvents(1)];
    const [left, right] = splitColumns(merged);
    expect(left).toHaveLength(9);
    expect(right).toHaveLength(9);
    expect(reduceTurn(left).answer).toBe(BERYLLIUM_ANSWER);
    expect(reduceTurn(right).chips).toHaveLength(4);
  });

  it('defaults untagged events to the left column', () => {
    const [left, right] = splitColumns(berylliumTurnEvents());
    expect(left).toHaveLength(9);
    expect(right).toHaveLength(0);
  });
});

describe('toggleChip', () => {
  it('flips expanded state immutably', () => {
    const turn = reduceTurn(berylliumTurnEvents());
    expect(turn.chips[2].expanded).toBe(false);
    const toggled = toggleChip(turn, 2);
    expect(toggled.chips[2].expanded).toBe(true);
    expect(turn.chips[2].expanded).toBe(false);
    expect(toggleChip(toggled, 2).chips[2].expanded).toBe(false);
  });

  it('ignores out-of-range indices', () => {
    const turn = reduceTurn(berylliumTurnEvents());
    expect(toggleChip(turn, 99)).toBe(turn);
  });
});
