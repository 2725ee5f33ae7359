/**
 * Resolve a transcript selection (textarea offsets) to an utterance range.
 *
 * Directly covered attributed lines win; a selection lying wholly between
 * attributed lines resolves to its surrounding pair. Selections that touch
 * no resolvable sequence numbers return null (caller shows a hint).
 */

import { LineView } from "./ot.js";

export interface SeqRange {
  start_seq: number;
  end_seq: number;
}

export function resolveSelectionRange(lines: LineView[], selStart: number,
                                      selEnd: number): SeqRange | null {
  if (lines.length === 0) return null;
  const lo = Math.min(selStart, selEnd);
  const hi = Math.max(selStart, selEnd);
  let offset = 0;
  let firstLine = -1;
  let lastLine = -1;
  lines.forEach((line, i) => {
    const end = offset + line.text.length;
    // a selection touching any part of the line, even mid-line, covers it
    if (hi >= offset && lo <= end) {
      if (firstLine < 0) firstLine = i;
      lastLine = i;
    }
    offset = end + 1;
  });
  if (firstLine < 0) return null;

  const covered: number[] = [];
  for (let i = firstLine; i <= lastLine; i++) {
    const seq = lines[i].attrs?.utt_seq;
    if (seq !== undefined) covered.push(seq);
  }
  if (covered.length) {
    return { start_seq: Math.min(...covered), end_seq: Math.max(...covered) };
  }
  let prev: number | undefined;
  for (let i = firstLine - 1; i >= 0; i--) {
    prev = lines[i].attrs?.utt_seq;
    if (prev !== undefined) break;
  }
  let next: number | undefined;
  for (let i = lastLine + 1; i < lines.length; i++) {
    next = lines[i].attrs?.utt_seq;
    if (next !== undefined) break;
  }
  if (prev !== undefined && next !== undefined) {
    return { start_seq: prev, end_seq: next };
  }
  return null;
}
