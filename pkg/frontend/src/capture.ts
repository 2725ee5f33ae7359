/**
 * Microphone capture: worklet-tapped float audio, downsampled to 16 kHz,
 * packed into exactly one-second s16le chunks, uploaded strictly in order.
 *
 * The math and sequencing live in pure classes so they are testable without
 * a browser; only startCapture touches web audio APIs.
 */

export const TARGET_RATE = 16000;
export const CHUNK_SAMPLES = TARGET_RATE;

export function downsample(input: Float32Array, fromRate: number,
                           toRate: number = TARGET_RATE): Float32Array {
  if (fromRate === toRate) return input;
  if (fromRate < toRate) throw new Error("upsampling is not supported");
  const ratio = fromRate / toRate;
  const outLength = Math.floor(input.length / ratio);
  const out = new Float32Array(outLength);
  for (let i = 0; i < outLength; i++) {
    const pos = i * ratio;
    const i0 = Math.floor(pos);
    const i1 = Math.min(i0 + 1, input.length - 1);
    const frac = pos - i0;
    out[i] = input[i0] * (1 - frac) + input[i1] * frac;
  }
  return out;
}

export function floatToInt16(input: Float32Array): Int16Array {
  const out = new Int16Array(input.length);
  for (let i = 0; i < input.length; i++) {
    const v = Math.max(-1, Math.min(1, input[i]));
    out[i] = Math.round(v < 0 ? v * 32768 : v * 32767);
  }
  return out;
}

/** Accumulates arbitrary-sized sample bursts into exact one-second chunks. */
export class PcmChunker {
  private buffer = new Float32Array(0);

  push(samples: Float32Array): Int16Array[] {
    const joined = new Float32Array(this.buffer.length + samples.length);
    joined.set(this.buffer);
    joined.set(samples, this.buffer.length);
    const chunks: Int16Array[] = [];
    let pos = 0;
    while (joined.length - pos >= CHUNK_SAMPLES) {
      chunks.push(floatToInt16(joined.subarray(pos, pos + CHUNK_SAMPLES)));
      pos += CHUNK_SAMPLES;
    }
    this.buffer = joined.slice(pos);
    return chunks;
  }
}

/**
 * Uploads chunks with increasing chunk_seq, one at a time: a later chunk is
 * never posted before the previous one resolved, so the server never sees a
 * gap or reordering.
 */
export class ChunkUploader {
  private queue: Int16Array[] = [];
  private nextSeq = 0;
  private busy = false;
  onError: (err: unknown) => void = () => {};

  constructor(private post: (seq: number, body: Uint8Array) => Promise<void>) {}

  enqueue(chunk: Int16Array): void {
    this.queue.push(chunk);
    void this.pump();
  }

  get pendingUploads(): number {
    return this.queue.length + (this.busy ? 1 : 0);
  }

  private async pump(): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      while (this.queue.length) {
        const chunk = this.queue.shift()!;
        const seq = this.nextSeq;
        const bytes = new Uint8Array(chunk.buffer.slice(0), chunk.byteOffset,
                                     chunk.byteLength);
        try {
          await this.post(seq, bytes);
          this.nextSeq = seq + 1;
        } catch (err) {
          this.onError(err);
          return; // stop; resending out of order would be rejected anyway
        }
      }
    } finally {
      this.busy = false;
    }
  }
}

const WORKLET_SOURCE = `
class PcmTapProcessor extends AudioWorkletProcessor {
  process(inputs) {
    const ch0 = inputs[0] && inputs[0][0];
    if (ch0 && ch0.length) {
      const copy = new Float32Array(ch0.length);
      copy.set(ch0);
      this.port.postMessage(copy, [copy.buffer]);
    }
    return true;
  }
}
registerProcessor("pcm-tap", PcmTapProcessor);
`;

export interface CaptureHandle {
  stop(): Promise<void>;
}

/** Browser-only: tap the microphone off the UI thread and stream chunks. */
export async function startCapture(
  post: (seq: number, body: Uint8Array) => Promise<void>,
  onError: (err: unknown) => void,
): Promise<CaptureHandle> {
  const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
  const ctx = new AudioContext();
  const workletUrl = URL.createObjectURL(
    new Blob([WORKLET_SOURCE], { type: "application/javascript" }));
  await ctx.audioWorklet.addModule(workletUrl);
  URL.revokeObjectURL(workletUrl);

  const source = ctx.createMediaStreamSource(stream);
  const tap = new AudioWorkletNode(ctx, "pcm-tap");
  source.connect(tap);

  const chunker = new PcmChunker();
  const uploader = new ChunkUploader(post);
  uploader.onError = onError;
  tap.port.onmessage = (ev: MessageEvent<Float32Array>) => {
    const resampled = downsample(ev.data, ctx.sampleRate);
    for (const chunk of chunker.push(resampled)) uploader.enqueue(chunk);
  };

  return {
    async stop() {
      tap.port.onmessage = null;
      source.disconnect();
      stream.getTracks().forEach((t) => t.stop());
      await ctx.close();
    },
  };
}
