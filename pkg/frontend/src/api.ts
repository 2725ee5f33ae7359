/** Thin REST client for the gateway. */

export interface SessionInfo {
  session_id: string;
  chunk_length_words: number;
}

export class Api {
  constructor(private base: string = "") {}

  private async request(method: string, path: string, body?: unknown,
                        raw?: Uint8Array): Promise<Response> {
    const init: RequestInit = { method };
    if (raw !== undefined) {
      init.body = raw as unknown as BodyInit;
      init.headers = { "content-type": "application/octet-stream" };
    } else if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    const resp = await fetch(this.base + path, init);
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        detail = (await resp.json()).error ?? detail;
      } catch { /* non-JSON error body */ }
      throw new Error(detail);
    }
    return resp;
  }

  async createSession(chunkLengthWords?: number): Promise<SessionInfo> {
    const resp = await this.request("POST", "/sessions",
      chunkLengthWords ? { chunk_length_words: chunkLengthWords } : {});
    return resp.json();
  }

  async uploadChunk(sid: string, track: string, seq: number,
                    body: Uint8Array): Promise<void> {
    await this.request("POST", `/sessions/${sid}/tracks/${track}/chunks/${seq}`,
                       undefined, body);
  }

  async setChunkLength(sid: string, words: number): Promise<void> {
    await this.request("PUT", `/sessions/${sid}/config`,
                       { chunk_length_words: words });
  }

  async setSpeaker(sid: string, track: string, name: string): Promise<void> {
    await this.request("PUT", `/sessions/${sid}/tracks/${track}/speaker`,
                       { display_name: name });
  }

  async summarize(sid: string, startSeq: number, endSeq: number): Promise<void> {
    await this.request("POST", `/sessions/${sid}/summarize`,
                       { start_seq: startSeq, end_seq: endSeq });
  }

  async setDebug(sid: string, enabled: boolean): Promise<void> {
    await this.request("POST", `/sessions/${sid}/debug`, { enabled });
  }

  async closeSession(sid: string): Promise<void> {
    await this.request("POST", `/sessions/${sid}/close`);
  }
}
