/**
 * Browser entry point: control bar, the two side-by-side pads (transcript
 * left, summary right), microphone capture, and the Ctrl+Alt+S shortcut.
 */

import { Api } from "./api.js";
import { CaptureHandle, startCapture } from "./capture.js";
import { ClientDocView } from "./docview.js";
import { Component, LineView } from "./ot.js";
import { resolveSelectionRange } from "./selection.js";
import { PointView, SyncClient } from "./sync.js";

const CHUNK_LENGTH_CHOICES = [50, 100, 200];

/**
 * Selection -> on-demand summary request. Returns the issued range, or null
 * when the selection resolves to no utterances (the caller shows a hint).
 * Kept free of DOM types so the headless tests drive it directly.
 */
export async function triggerSummarizeFromSelection(
  lines: LineView[],
  selStart: number,
  selEnd: number,
  post: (startSeq: number, endSeq: number) => Promise<void>,
): Promise<{ start_seq: number; end_seq: number } | null> {
  const range = resolveSelectionRange(lines, selStart, selEnd);
  if (!range) return null;
  await post(range.start_seq, range.end_seq);
  return range;
}

interface PadElements {
  textarea: HTMLTextAreaElement;
  gutter: HTMLElement;
}

class PadBinding {
  constructor(private view: ClientDocView, private el: PadElements,
              private badge: (line: LineView, index: number) => string) {
    el.textarea.addEventListener("input", () => {
      this.view.localChange(el.textarea.value);
    });
    view.onChange = (_v, remoteOp) => this.render(remoteOp);
  }

  render(remoteOp: Component[] | null): void {
    const area = this.el.textarea;
    const focused = document.activeElement === area;
    let selStart = area.selectionStart;
    let selEnd = area.selectionEnd;
    if (remoteOp) {
      selStart = this.view.mapCursor(selStart, remoteOp);
      selEnd = this.view.mapCursor(selEnd, remoteOp);
    }
    if (area.value !== this.view.text) {
      area.value = this.view.text;
      if (focused) {
        area.selectionStart = selStart;
        area.selectionEnd = selEnd;
      }
    }
    this.el.gutter.replaceChildren(
      ...this.view.lines().map((line, i) => {
        const div = document.createElement("div");
        div.className = "gutter-line";
        div.textContent = this.badge(line, i);
        return div;
      }),
    );
  }
}

function toast(message: string): void {
  const el = document.getElementById("toast")!;
  el.textContent = message;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 2500);
}

function pointBySummaryId(points: PointView[], id: number): PointView | undefined {
  return points.find((p) => p.summary_id === id);
}

async function boot(): Promise<void> {
  const api = new Api("");
  const joinForm = document.getElementById("join-form") as HTMLFormElement;
  const appRoot = document.getElementById("app")!;

  joinForm.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const name = (document.getElementById("display-name") as HTMLInputElement).value
      || "guest";
    const existing = (document.getElementById("session-id") as HTMLInputElement).value
      .trim();
    let sessionId = existing;
    if (!sessionId) {
      const info = await api.createSession();
      sessionId = info.session_id;
    }
    joinForm.classList.add("hidden");
    appRoot.classList.remove("hidden");
    runSession(api, sessionId, name);
  });
}

function runSession(api: Api, sessionId: string, displayName: string): void {
  document.getElementById("session-label")!.textContent = sessionId;
  let points: PointView[] = [];
  let debug = false;
  let capture: CaptureHandle | null = null;

  const transcriptPad: PadElements = {
    textarea: document.getElementById("transcript-text") as HTMLTextAreaElement,
    gutter: document.getElementById("transcript-gutter")!,
  };
  const summaryPad: PadElements = {
    textarea: document.getElementById("summary-text") as HTMLTextAreaElement,
    gutter: document.getElementById("summary-gutter")!,
  };

  const sync = new SyncClient(location.origin, sessionId, displayName, {
    onReady() {
      new PadBinding(sync.transcript, transcriptPad, (line) => {
        const seq = line.attrs?.utt_seq;
        return debug && seq !== undefined ? `#${seq}` : "";
      }).render(null);
      new PadBinding(sync.summary, summaryPad, (line) => {
        const id = line.attrs?.summary_id;
        if (id === undefined) return "";
        const point = pointBySummaryId(points, id);
        const lock = point?.state === "frozen" ? "🔒" : "";
        if (!debug) return lock;
        const range = point ? ` (${point.start_seq}–${point.end_seq})` : "";
        return `${lock}#s:${id}${range}`;
      }).render(null);
    },
    onPoints(p) {
      points = p;
      sync.summary?.onChange(sync.summary, null);
    },
    onDebug(enabled) {
      debug = enabled;
      sync.transcript?.onChange(sync.transcript, null);
      sync.summary?.onChange(sync.summary, null);
    },
    onError(message) {
      toast(message);
    },
    onClose() {
      toast("connection closed");
    },
  });

  const density = document.getElementById("chunk-length") as HTMLSelectElement;
  density.replaceChildren(...CHUNK_LENGTH_CHOICES.map((n) => {
    const opt = document.createElement("option");
    opt.value = String(n);
    opt.textContent = `${n} words`;
    if (n === 100) opt.selected = true;
    return opt;
  }));
  density.addEventListener("change", () => {
    api.setChunkLength(sessionId, Number(density.value)).catch((e) => toast(String(e)));
  });

  const debugToggle = document.getElementById("debug-toggle") as HTMLInputElement;
  debugToggle.addEventListener("change", () => {
    api.setDebug(sessionId, debugToggle.checked).catch((e) => toast(String(e)));
  });

  const micButton = document.getElementById("mic-toggle") as HTMLButtonElement;
  micButton.addEventListener("click", async () => {
    if (capture) {
      await capture.stop();
      capture = null;
      micButton.textContent = "Start mic";
      return;
    }
    const track = `${displayName}-mic`;
    try {
      await api.setSpeaker(sessionId, track, displayName);
      capture = await startCapture(
        (seq, body) => api.uploadChunk(sessionId, track, seq, body),
        (err) => toast(`upload failed: ${err}`),
      );
      micButton.textContent = "Stop mic";
    } catch (err) {
      // editing keeps working without local audio
      toast(`microphone unavailable: ${err}`);
    }
  });

  document.addEventListener("keydown", async (ev) => {
    if (!(ev.ctrlKey && ev.altKey && ev.key.toLowerCase() === "s")) return;
    ev.preventDefault();
    const area = transcriptPad.textarea;
    if (document.activeElement !== area) {
      toast("select transcript lines");
      return;
    }
    const issued = await triggerSummarizeFromSelection(
      sync.transcript.lines(), area.selectionStart, area.selectionEnd,
      (a, b) => api.summarize(sessionId, a, b),
    ).catch((e) => {
      toast(String(e));
      return null;
    });
    if (!issued) toast("select transcript lines");
  });
}

if (typeof document !== "undefined") {
  boot().catch((err) => console.error(err));
}
