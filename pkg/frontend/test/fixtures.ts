/** A canned SSE stream mirroring the server's scripted two-turn walkthrough
 * (first turn only): four tool interactions, then the grounded answer.
 */

import type { SseEvent } from '../src/sse.js';

const PROV: [string, string, string] = [
  'chemical',
  'Beryllium, elemental',
  'Human Health Effects-Symptoms',
];

function ev(event: string, data: unknown): SseEvent {
  return { event, data: JSON.stringify(data) };
}

export const BERYLLIUM_ANSWER =
  'Beryllium exposure causes acute pneumonitis, chest pain, bronchospasm and ' +
  'cough after inhalation; acute dermatitis after skin contact; and acute ' +
  'conjunctivitis after eye contact.';

export function berylliumTurnEvents(column?: number): SseEvent[] {
  const tag = column === undefined ? {} : { column };
  return [
    ev('tool_call', {
      ...tag,
      id: 'call-1',
      tool_name: 'bm25_search',
      arguments: { query: 'beryllium symptoms' },
    }),
    ev('tool_result', {
      ...tag,
      id: 'call-1',
      tool_name: 'bm25_search',
      text: 'Summary: exposure to beryllium dust can produce acute pneumonitis…',
      token_count: 120,
      provenance: [PROV],
    }),
    ev('tool_call', {
      ...tag,
      id: 'call-2',
      tool_name: 'keyword_search',
      arguments: { keyword: 'beryllium' },
    }),
    ev('tool_result', {
      ...tag,
      id: 'call-2',
      tool_name: 'keyword_search',
      text: '# Search results for beryllium\n## chemical results (most relevant first):\n1. Beryllium, elemental',
      token_count: 30,
      provenance: [],
    }),
    ev('tool_call', {
      ...tag,
      id: 'call-3',
      tool_name: 'read_general',
      arguments: { db_name: 'chemical', chemical_name: 'Beryllium, elemental' },
    }),
    ev('tool_result', {
      ...tag,
      id: 'call-3',
      tool_name: 'read_general',
      text: '# General information for Beryllium, elemental (chemical)\n## Abstract\n…',
      token_count: 55,
      provenance: [PROV],
    }),
    ev('tool_call', {
      ...tag,
      id: 'call-4',
      tool_name: 'qa_specific',
      arguments: {
        db_name: 'chemical',
        chemical_name: 'Beryllium, elemental',
        section_name: 'Human Health Effects-Symptoms',
        question: 'What symptoms appear when humans are exposed to beryllium?',
      },
    }),
    ev('tool_result', {
      ...tag,
      id: 'call-4',
      tool_name: 'qa_specific',
      text: 'Answer: acute pneumonitis, dermatitis, and conjunctivitis.',
      token_count: 40,
      provenance: [PROV],
    }),
    ev('final_response', { ...tag, text: BERYLLIUM_ANSWER, token_count: 38 }),
  ];
}
