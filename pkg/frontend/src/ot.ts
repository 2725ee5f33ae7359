/**
 * Client-side mirror of the server's retain/insert/delete operations.
 *
 * The transform here must make exactly the same decisions as the server,
 * including the insert-position tie-break by author ordering, so that a
 * client rebasing its pending ops against incoming remote ops predicts the
 * server's result byte for byte.
 */

export type Attrs = Record<string, number>;

export type Component =
  | { retain: number }
  | { insert: string; attrs?: Attrs }
  | { delete: number };

export interface DocState {
  text: string;
  attrs: (Attrs | null)[];
}

export interface LineView {
  text: string;
  attrs: Attrs | null;
}

export function isRetain(c: Component): c is { retain: number } {
  return "retain" in c;
}

export function isInsert(c: Component): c is { insert: string; attrs?: Attrs } {
  return "insert" in c;
}

export function isDelete(c: Component): c is { delete: number } {
  return "delete" in c;
}

export function baseLength(comps: Component[]): number {
  let n = 0;
  for (const c of comps) {
    if (isRetain(c)) n += c.retain;
    else if (isDelete(c)) n += c.delete;
  }
  return n;
}

export function compact(comps: Component[]): Component[] {
  const out: Component[] = [];
  for (const c of comps) {
    if ((isRetain(c) && c.retain === 0) || (isDelete(c) && c.delete === 0)) continue;
    if (isInsert(c) && c.insert === "") continue;
    const last = out[out.length - 1];
    if (last && isRetain(last) && isRetain(c)) {
      out[out.length - 1] = { retain: last.retain + c.retain };
    } else if (last && isDelete(last) && isDelete(c)) {
      out[out.length - 1] = { delete: last.delete + c.delete };
    } else if (last && isInsert(last) && isInsert(c) &&
               attrsEqual(last.attrs, c.attrs)) {
      out[out.length - 1] = { insert: last.insert + c.insert, attrs: last.attrs };
    } else {
      out.push({ ...c });
    }
  }
  return out;
}

function attrsEqual(a?: Attrs, b?: Attrs): boolean {
  return JSON.stringify(a ?? null) === JSON.stringify(b ?? null);
}

export function applyToState(state: DocState, comps: Component[]): DocState {
  if (baseLength(comps) !== state.text.length) {
    throw new Error(
      `op spans ${baseLength(comps)} chars, document has ${state.text.length}`);
  }
  let pos = 0;
  const parts: string[] = [];
  const attrs: (Attrs | null)[] = [];
  for (const c of comps) {
    if (isRetain(c)) {
      parts.push(state.text.slice(pos, pos + c.retain));
      attrs.push(...state.attrs.slice(pos, pos + c.retain));
      pos += c.retain;
    } else if (isInsert(c)) {
      parts.push(c.insert);
      for (let i = 0; i < c.insert.length; i++) attrs.push(c.attrs ?? null);
    } else {
      pos += c.delete;
    }
  }
  return { text: parts.join(""), attrs };
}

export function applyToText(text: string, comps: Component[]): string {
  return applyToState({ text, attrs: new Array(text.length).fill(null) }, comps).text;
}

/**
 * Rebase `moving` to apply after `fixed` (both built on the same text).
 * `movingFirst` resolves insert-position ties; callers pass the author
 * comparison so both sides agree regardless of arrival order.
 */
export function transform(moving: Component[], fixed: Component[],
                          movingFirst: boolean): Component[] {
  const sm = [...moving].reverse();
  const sf = [...fixed].reverse();
  const out: Component[] = [];
  while (sm.length || sf.length) {
    const cm = sm[sm.length - 1];
    const cf = sf[sf.length - 1];
    if (cm && isInsert(cm) && (!cf || !isInsert(cf) || movingFirst)) {
      out.push(cm);
      sm.pop();
      continue;
    }
    if (cf && isInsert(cf)) {
      out.push({ retain: cf.insert.length });
      sf.pop();
      continue;
    }
    if (!cm || !cf) throw new Error("operations span different base lengths");
    const nm = isRetain(cm) ? cm.retain : (cm as { delete: number }).delete;
    const nf = isRetain(cf) ? cf.retain : (cf as { delete: number }).delete;
    const n = Math.min(nm, nf);
    if (isRetain(cm) && isRetain(cf)) out.push({ retain: n });
    else if (isDelete(cm) && isRetain(cf)) out.push({ delete: n });
    // chars deleted by `fixed` need nothing from `moving`
    sm.pop();
    if (nm > n) sm.push(isRetain(cm) ? { retain: nm - n } : { delete: nm - n });
    sf.pop();
    if (nf > n) sf.push(isRetain(cf) ? { retain: nf - n } : { delete: nf - n });
  }
  return compact(out);
}

/** Map a caret offset through an applied operation. */
export function transformCursor(offset: number, comps: Component[]): number {
  let pos = 0;
  let result = offset;
  for (const c of comps) {
    if (isRetain(c)) {
      pos += c.retain;
    } else if (isInsert(c)) {
      if (pos <= result) result += c.insert.length;
      pos += c.insert.length;
    } else {
      if (pos < result) result -= Math.min(c.delete, result - pos);
    }
    if (pos > result) break;
  }
  return result;
}

/** Derive the per-line attribute view; each attribute value claims one line. */
export function deriveLines(state: DocState): LineView[] {
  if (!state.text) return [];
  const lines: LineView[] = [];
  const claimed = new Set<string>();
  let start = 0;
  for (const raw of state.text.split("\n")) {
    const end = start + raw.length;
    let attrs: Attrs | null = null;
    for (let i = start; i < end; i++) {
      const a = state.attrs[i];
      if (!a) continue;
      const keys = Object.entries(a).map(([k, v]) => `${k}=${v}`);
      if (keys.some((k) => claimed.has(k))) continue;
      keys.forEach((k) => claimed.add(k));
      attrs = a;
      break;
    }
    lines.push({ text: raw, attrs });
    start = end + 1;
  }
  return lines;
}

/** Minimal diff between two texts: common prefix/suffix, one replace burst. */
export function diffToComponents(oldText: string, newText: string): Component[] | null {
  if (oldText === newText) return null;
  let prefix = 0;
  const maxPrefix = Math.min(oldText.length, newText.length);
  while (prefix < maxPrefix && oldText[prefix] === newText[prefix]) prefix++;
  let suffix = 0;
  while (
    suffix < Math.min(oldText.length, newText.length) - prefix &&
    oldText[oldText.length - 1 - suffix] === newText[newText.length - 1 - suffix]
  ) {
    suffix++;
  }
  const deleted = oldText.length - prefix - suffix;
  const inserted = newText.slice(prefix, newText.length - suffix);
  const comps: Component[] = [];
  if (prefix) comps.push({ retain: prefix });
  if (deleted) comps.push({ delete: deleted });
  if (inserted) comps.push({ insert: inserted });
  if (suffix) comps.push({ retain: suffix });
  return comps;
}
