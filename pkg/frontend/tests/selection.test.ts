// Secondary acceptance: selecting rendered lines with seqs 3..6 issues
// exactly one POST with (3,6); a selection without attributed lines issues
// none.

import { describe, expect, it } from "vitest";

import { triggerSummarizeFromSelection } from "../src/app.js";
import { LineView } from "../src/ot.js";
import { resolveSelectionRange } from "../src/selection.js";

const LINES: LineView[] = [
  { text: "Vojta:  first point", attrs: { utt_seq: 3 } },
  { text: "Fanda:  a reply", attrs: { utt_seq: 4 } },
  { text: "manual correction note", attrs: null },
  { text: "Vojta:  follow up", attrs: { utt_seq: 5 } },
  { text: "Fanda:  wrap up", attrs: { utt_seq: 6 } },
];

function fullText(lines: LineView[]): string {
  return lines.map((l) => l.text).join("\n");
}

describe("selection to summary request", () => {
  it("selecting lines with seqs 3..6 issues exactly one POST (3,6)", async () => {
    const posts: [number, number][] = [];
    const issued = await triggerSummarizeFromSelection(
      LINES, 0, fullText(LINES).length,
      async (a, b) => { posts.push([a, b]); });
    expect(issued).toEqual({ start_seq: 3, end_seq: 6 });
    expect(posts).toEqual([[3, 6]]);
  });

  it("a selection without any resolvable lines issues no POST", async () => {
    const bare: LineView[] = [
      { text: "just a note", attrs: null },
      { text: "another note", attrs: null },
    ];
    const posts: [number, number][] = [];
    const issued = await triggerSummarizeFromSelection(
      bare, 0, fullText(bare).length,
      async (a, b) => { posts.push([a, b]); });
    expect(issued).toBeNull();
    expect(posts).toEqual([]);
  });

  it("a selection starting mid-line includes that line's seq", () => {
    const startOfLine2 = LINES[0].text.length + 1 + 4; // inside "Fanda: ..."
    const range = resolveSelectionRange(LINES, startOfLine2, fullText(LINES).length);
    expect(range).toEqual({ start_seq: 4, end_seq: 6 });
  });

  it("an unattributed line between utterances resolves to its neighbors", () => {
    const noteStart = LINES[0].text.length + 1 + LINES[1].text.length + 1;
    const range = resolveSelectionRange(LINES, noteStart + 1, noteStart + 3);
    expect(range).toEqual({ start_seq: 4, end_seq: 5 });
  });

  it("a collapsed caret on one attributed line selects just it", () => {
    const range = resolveSelectionRange(LINES, 2, 2);
    expect(range).toEqual({ start_seq: 3, end_seq: 3 });
  });
});
