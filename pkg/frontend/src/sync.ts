/** WebSocket session sync: snapshots, op stream, point states, debug flag. */

import { ClientDocView, EditApplied, SnapshotMessage } from "./docview.js";

export interface PointView {
  summary_id: number;
  kind: string;
  state: string;
  start_seq: number;
  end_seq: number;
  request_seq: number;
  text: string;
}

export interface SyncCallbacks {
  onReady(): void;
  onPoints(points: PointView[]): void;
  onDebug(enabled: boolean): void;
  onError(message: string): void;
  onClose(): void;
}

export class SyncClient {
  authorId = "";
  debug = false;
  points: PointView[] = [];
  transcript!: ClientDocView;
  summary!: ClientDocView;
  private ws: WebSocket;
  private snapshotsSeen = 0;

  constructor(baseUrl: string, sessionId: string, displayName: string,
              private callbacks: SyncCallbacks) {
    const wsBase = baseUrl.replace(/^http/, "ws");
    this.ws = new WebSocket(`${wsBase}/sessions/${sessionId}/sync`);
    this.ws.onopen = () => {
      this.ws.send(JSON.stringify({ type: "hello", author: displayName }));
    };
    this.ws.onmessage = (ev) => this.handle(JSON.parse(ev.data));
    this.ws.onclose = () => callbacks.onClose();
  }

  private send = (msg: object): void => {
    this.ws.send(JSON.stringify(msg));
  };

  private handle(msg: Record<string, unknown>): void {
    switch (msg.type) {
      case "welcome": {
        this.authorId = msg.author_id as string;
        this.debug = Boolean(msg.debug);
        this.transcript = new ClientDocView("transcript", this.authorId, this.send);
        this.summary = new ClientDocView("summary", this.authorId, this.send);
        break;
      }
      case "snapshot": {
        const snap = msg as unknown as SnapshotMessage;
        this.view(snap.doc_id).loadSnapshot(snap);
        this.snapshotsSeen++;
        if (this.snapshotsSeen === 2) this.callbacks.onReady();
        break;
      }
      case "edit-applied": {
        const applied = msg as unknown as EditApplied;
        this.view(applied.doc_id).applyServer(applied);
        break;
      }
      case "points": {
        this.points = msg.points as PointView[];
        this.callbacks.onPoints(this.points);
        break;
      }
      case "debug": {
        this.debug = Boolean(msg.enabled);
        this.callbacks.onDebug(this.debug);
        break;
      }
      case "error": {
        this.callbacks.onError(String(msg.message ?? "unknown error"));
        break;
      }
    }
  }

  view(docId: string): ClientDocView {
    if (docId === "transcript") return this.transcript;
    if (docId === "summary") return this.summary;
    throw new Error(`unknown doc ${docId}`);
  }

  close(): void {
    this.ws.close();
  }
}
