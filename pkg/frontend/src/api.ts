/** Thin fetch client for the chat service; all logic lives server-side. */

import { readSseStream, SseEvent } from './sse.js';
import type { DocumentView } from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public body?: unknown,
  ) {
    super(message);
  }
}

async function expectJson(resp: Response): Promise<unknown> {
  const body = await resp.json().catch(() => undefined);
  if (!resp.ok) {
    const msg =
      body && typeof body === 'object' && 'error' in body
        ? String((body as { error: unknown }).error)
        : `HTTP ${resp.status}`;
    throw new ApiError(resp.status, msg, body);
  }
  return body;
}

export class ChatApi {
  constructor(private base: string = '') {}

  async createSession(configId: string): Promise<string> {
    const resp = await fetch(`${this.base}/sessions`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ config_id: configId }),
    });
    const body = (await expectJson(resp)) as { session_id: string };
    return body.session_id;
  }

  /** Send one message; resolves after the SSE stream ends. */
  async sendMessage(
    sessionId: string,
    text: string,
    onEvent: (e: SseEvent) => void,
  ): Promise<void> {
    const resp = await fetch(`${this.base}/sessions/${sessionId}/messages`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ text }),
    });
    if (!resp.ok) {
      await expectJson(resp); // throws with the server's error payload
      return;
    }
    if (!resp.body) throw new ApiError(0, 'response had no body');
    await readSseStream(resp.body, onEvent);
  }

  /** Fan one prompt out to two configs; events carry a column tag. */
  async compare(
    configIds: [string, string],
    text: string,
    onEvent: (e: SseEvent) => void,
  ): Promise<void> {
    const resp = await fetch(`${this.base}/compare`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ config_ids: configIds, text }),
    });
    if (!resp.ok) {
      await expectJson(resp);
      return;
    }
    if (!resp.body) throw new ApiError(0, 'response had no body');
    await readSseStream(resp.body, onEvent);
  }

  async getDocument(db: string, title: string): Promise<DocumentView> {
    const resp = await fetch(
      `${this.base}/corpus/docs/${encodeURIComponent(db)}/${encodeURIComponent(title)}`,
    );
    return (await expectJson(resp)) as DocumentView;
  }
}
