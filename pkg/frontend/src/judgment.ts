/** Local preference log for the compare view. */

import type { Judgment } from './types.js';

export class JudgmentLog {
  private entries: Judgment[] = [];

  add(prompt: string, configIds: [string, string], preferred: 0 | 1 | 'draw',
      now: () => Date = () => new Date()): Judgment {
    const entry: Judgment = { prompt, configIds, preferred, at: now().toISOString() };
    this.entries.push(entry);
    return entry;
  }

  all(): Judgment[] {
    return this.entries.slice();
  }

  get size(): number {
    return this.entries.length;
  }

  /** Win/lose/draw tallies for the left-hand config. */
  tally(): { win: number; lose: number; draw: number } {
    let win = 0;
    let lose = 0;
    let draw = 0;
    for (const e of this.entries) {
      if (e.preferred === 0) win++;
      else if (e.preferred === 1) lose++;
      else draw++;
    }
    return { win, lose, draw };
  }
}
