import { Component, DocState, applyToState, transform } from "../src/ot.js";
import { EditApplied } from "../src/docview.js";

/** Deterministic PRNG so test failures reproduce. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomOpFor(text: string, rng: () => number): Component[] {
  const comps: Component[] = [];
  let pos = 0;
  while (pos < text.length) {
    const r = rng();
    const remaining = text.length - pos;
    const n = 1 + Math.floor(rng() * remaining);
    if (r < 0.45) {
      comps.push({ retain: n });
      pos += n;
    } else if (r < 0.7) {
      comps.push({ delete: n });
      pos += n;
    } else {
      comps.push({ insert: ["x", "yz", "\n", "word "][Math.floor(rng() * 4)] });
    }
  }
  if (rng() < 0.5) comps.push({ insert: "tail" });
  if (comps.length === 0) comps.push({ insert: "?" });
  return comps;
}

/** Authoritative mirror of the server's transform-then-apply pipeline. */
export class MiniServer {
  state: DocState = { text: "", attrs: [] };
  revision = 0;
  history: { author: string; components: Component[] }[] = [];
  broadcasts: EditApplied[] = [];

  constructor(public docId = "transcript") {}

  submit(author: string, baseRevision: number, components: Component[]): void {
    let comps = components;
    for (const past of this.history.slice(baseRevision)) {
      comps = transform(comps, past.components, author < past.author);
    }
    this.state = applyToState(this.state, comps);
    this.history.push({ author, components: comps });
    this.revision++;
    this.broadcasts.push({
      doc_id: this.docId, revision: this.revision, author, components: comps,
    });
  }
}
