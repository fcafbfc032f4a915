/** Wire-level shapes mirrored from the HTTP/SSE API. */

export type TraceEventKind = 'tool_call' | 'tool_result' | 'final_response' | 'error';

export interface ToolCallEvent {
  id: string;
  tool_name: string;
  arguments: Record<string, unknown>;
  column?: number;
}

export interface ToolResultEvent {
  id: string;
  tool_name: string;
  text: string;
  token_count: number;
  /** [db_name, document_title, section_name] triples */
  provenance: [string, string, string][];
  column?: number;
}

export interface FinalResponseEvent {
  text: string;
  token_count: number;
  column?: number;
}

export interface ErrorEvent {
  message: string;
  partial_interactions?: number;
  column?: number;
}

export interface TraceEvent {
  kind: TraceEventKind;
  data: ToolCallEvent | ToolResultEvent | FinalResponseEvent | ErrorEvent;
}

export interface DocumentView {
  db_name: string;
  title: string;
  aliases: string[];
  abstract: string;
  sections: { name: string; body: string; token_count: number }[];
}

export interface Judgment {
  prompt: string;
  configIds: [string, string];
  /** 0 = left column preferred, 1 = right column, 'draw' for no preference */
  preferred: 0 | 1 | 'draw';
  at: string;
}
