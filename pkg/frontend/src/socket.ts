// WebSocket session: holds the client-side view of the server (latest
// snapshot, pilot flag, loaded sequence, last report) and funnels every
// outgoing message through the schema-validating encoder. The UI never
// mutates simulation state except via these messages.
import {
  decodeServerMessage,
  encodeClientMessage,
  helloSchema,
  logSchema,
  reportSchema,
  snapshotSchema,
  type ClientMessageType,
  type Envelope,
  type Hello,
  type Report,
  type SequenceJson,
  type Snapshot,
} from "./protocol.js";
import type { Sequence } from "./timeline.js";
import { sequenceFromDict, sequenceToDict } from "./timeline.js";
import { z } from "zod";

export type ConnectionStatus = "disconnected" | "connecting" | "connected";

export interface SessionState {
  status: ConnectionStatus;
  hello: Hello | null;
  pilot: boolean;
  snapshot: Snapshot | null;
  snapshotAt: number; // ms timestamp of last snapshot (performance.now)
  sequence: Sequence | null;
  selectedChannel: number; // index into sequence.channels
  report: Report | null;
  reportLogId: string | null;
  lastLogId: string | null;
  lastError: string | null;
}

type Listener = (state: SessionState) => void;

const STALE_AFTER_MS = 1000;

export class StudioSession {
  state: SessionState = {
    status: "disconnected",
    hello: null,
    pilot: false,
    snapshot: null,
    snapshotAt: 0,
    sequence: null,
    selectedChannel: 0,
    report: null,
    reportLogId: null,
    lastLogId: null,
    lastError: null,
  };

  private ws: WebSocket | null = null;
  private seqNo = 0;
  private listeners = new Set<Listener>();
  private pending = new Map<number, (env: Envelope) => void>();

  onChange(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const l of this.listeners) l(this.state);
  }

  connect(url: string): void {
    this.state.status = "connecting";
    this.emit();
    const ws = new WebSocket(url);
    this.ws = ws;
    ws.onopen = () => {
      this.state.status = "connected";
      this.emit();
    };
    ws.onclose = () => {
      this.state.status = "disconnected";
      this.state.pilot = false;
      this.emit();
    };
    ws.onmessage = (event: MessageEvent) => this.handleMessage(String(event.data));
  }

  stale(now: number): boolean {
    return (
      this.state.status !== "connected" ||
      this.state.snapshot === null ||
      now - this.state.snapshotAt > STALE_AFTER_MS
    );
  }

  send(type: ClientMessageType, payload: unknown = {}): number {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return -1;
    this.seqNo += 1;
    this.ws.send(encodeClientMessage(type, this.seqNo, payload));
    return this.seqNo;
  }

  /** Send and resolve with the direct reply (matched on reply_to). */
  request(type: ClientMessageType, payload: unknown = {}): Promise<Envelope> {
    const seq = this.send(type, payload);
    if (seq < 0) return Promise.reject(new Error("not connected"));
    return new Promise((resolve) => this.pending.set(seq, resolve));
  }

  private handleMessage(raw: string): void {
    let env: Envelope;
    try {
      env = decodeServerMessage(raw);
    } catch (err) {
      this.state.lastError = `protocol violation: ${String(err)}`;
      this.emit();
      return;
    }
    switch (env.type) {
      case "hello":
        this.state.hello = helloSchema.parse(env.payload);
        break;
      case "snapshot":
        this.state.snapshot = snapshotSchema.parse(env.payload);
        this.state.snapshotAt = performance.now();
        break;
      case "pilot_granted":
        this.state.pilot = true;
        break;
      case "pilot_released":
      case "pilot_denied":
        this.state.pilot = false;
        break;
      case "play_done":
        this.state.lastLogId = (env.payload as { log_id: string }).log_id;
        break;
      case "report": {
        const body = z
          .object({ log_id: z.string(), report: reportSchema })
          .parse(env.payload);
        this.state.report = body.report;
        this.state.reportLogId = body.log_id;
        break;
      }
      case "log":
        z.object({ log_id: z.string(), log: logSchema }).parse(env.payload);
        break;
      case "error":
      case "busy":
      case "not_pilot":
        this.state.lastError = (env.payload as { reason: string }).reason;
        break;
      default:
        break;
    }
    if (env.reply_to !== undefined && this.pending.has(env.reply_to)) {
      const resolve = this.pending.get(env.reply_to)!;
      this.pending.delete(env.reply_to);
      resolve(env);
    }
    this.emit();
  }

  // -- convenience wrappers ---------------------------------------------------

  acquirePilot(): Promise<Envelope> {
    return this.request("pilot_acquire");
  }

  releasePilot(): Promise<Envelope> {
    return this.request("pilot_release");
  }

  sendInput(event: { kind: "axis" | "press" | "release"; id: string; value?: number }): void {
    this.send("input", event);
  }

  loadSequence(data: SequenceJson): void {
    this.state.sequence = sequenceFromDict(data);
    this.state.selectedChannel = 0;
    this.state.lastError = null;
    this.emit();
  }

  setSequence(seq: Sequence): void {
    this.state.sequence = seq;
    this.emit();
  }

  /** Client edits sync to the server only on explicit upload. */
  uploadSequence(): Promise<Envelope> {
    if (!this.state.sequence) return Promise.reject(new Error("no sequence loaded"));
    return this.request("seq_upload", { sequence: sequenceToDict(this.state.sequence) });
  }

  playSequence(): Promise<Envelope> {
    if (!this.state.sequence) return Promise.reject(new Error("no sequence loaded"));
    return this.request("seq_play", { name: this.state.sequence.name });
  }

  analyze(logId: string, intended?: Record<string, string>, impressions?: string, meaning?: string): Promise<Envelope> {
    const payload: Record<string, unknown> = { log_id: logId };
    if (intended && Object.keys(intended).length) payload.intended = intended;
    if (impressions) payload.impressions = impressions;
    if (meaning) payload.meaning = meaning;
    return this.request("analyze", payload);
  }
}
