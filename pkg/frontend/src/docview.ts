/**
 * One pad's client state: a mirror of the server document at its revision
 * plus a queue of local operations not yet acknowledged.
 *
 * One operation is in flight at a time; the server echoes it back as the
 * next edit-applied broadcast (recognizable by author), which acknowledges
 * it. Remote broadcasts are rebased against the pending queue the same way
 * the server rebases the pending ops against them, so local text always
 * predicts what the server will converge to.
 */

import {
  Attrs, Component, DocState, LineView, applyToState, compact, deriveLines,
  diffToComponents, transform, transformCursor,
} from "./ot.js";

export interface EditApplied {
  doc_id: string;
  revision: number;
  author: string;
  components: Component[];
}

export interface SnapshotMessage {
  doc_id: string;
  revision: number;
  lines: { text: string; attrs: Attrs | null; author: string }[];
}

export type SendEdit = (msg: {
  type: "edit";
  doc_id: string;
  base_revision: number;
  components: Component[];
}) => void;

export class ClientDocView {
  readonly docId: string;
  readonly author: string;
  revision = 0;
  private server: DocState = { text: "", attrs: [] };
  private local: DocState = { text: "", attrs: [] };
  private pending: Component[][] = [];
  private inFlight = false;
  private send: SendEdit;
  onChange: (view: ClientDocView, remoteOp: Component[] | null) => void = () => {};

  constructor(docId: string, author: string, send: SendEdit) {
    this.docId = docId;
    this.author = author;
    this.send = send;
  }

  get text(): string {
    return this.local.text;
  }

  get serverText(): string {
    return this.server.text;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  lines(): LineView[] {
    return deriveLines(this.local);
  }

  loadSnapshot(snap: SnapshotMessage): void {
    this.revision = snap.revision;
    const text = snap.lines.map((l) => l.text).join("\n");
    const attrs: (Attrs | null)[] = [];
    snap.lines.forEach((line, i) => {
      if (i) attrs.push(null);
      // stamp the whole line with its attribute; first-claim keeps it unique
      for (let j = 0; j < line.text.length; j++) attrs.push(line.attrs);
    });
    this.server = { text, attrs };
    this.local = { text, attrs: [...attrs] };
    this.pending = [];
    this.inFlight = false;
    this.onChange(this, null);
  }

  /** Commit whatever the user's textarea now holds as a local operation. */
  localChange(newText: string): void {
    const comps = diffToComponents(this.local.text, newText);
    if (!comps) return;
    this.local = applyToState(this.local, comps);
    this.pending.push(comps);
    this.flush();
  }

  localComponents(comps: Component[]): void {
    this.local = applyToState(this.local, comps);
    this.pending.push(compact(comps));
    this.flush();
  }

  private flush(): void {
    if (this.inFlight || this.pending.length === 0) return;
    this.inFlight = true;
    this.send({
      type: "edit",
      doc_id: this.docId,
      base_revision: this.revision,
      components: this.pending[0],
    });
  }

  /** Feed every edit-applied broadcast for this doc here, in revision order. */
  applyServer(msg: EditApplied): Component[] | null {
    if (msg.revision !== this.revision + 1) {
      throw new Error(
        `broadcast gap: at revision ${this.revision}, got ${msg.revision}`);
    }
    this.revision = msg.revision;
    this.server = applyToState(this.server, msg.components);
    if (msg.author === this.author) {
      // acknowledgment of pending[0]; local text already contains it
      this.pending.shift();
      this.inFlight = false;
      this.rebuildLocal();
      this.flush();
      this.onChange(this, null);
      return null;
    }
    // rebase the remote op through the pending queue, and every pending op
    // over the remote one, mirroring the server's author tie-break
    let remote = msg.components;
    const mineFirst = this.author < msg.author;
    this.pending = this.pending.map((mine) => {
      const mineRebased = transform(mine, remote, mineFirst);
      remote = transform(remote, mine, !mineFirst);
      return mineRebased;
    });
    this.rebuildLocal();
    this.onChange(this, remote);
    return remote;
  }

  private rebuildLocal(): void {
    let state = this.server;
    for (const comps of this.pending) state = applyToState(state, comps);
    this.local = state;
  }

  /** Where a caret at `offset` lands after a rebased remote op. */
  mapCursor(offset: number, remoteOp: Component[]): number {
    return transformCursor(offset, remoteOp);
  }
}
