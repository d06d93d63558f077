// WebSocket wiring with automatic reconnect.  All simulation mutations go
// through protocol commands; the client never computes simulation state.

import { commands, parseServerMessage } from "./protocol.js";
import { ViewModel } from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  // deliberately loose: both the browser WebSocket and test fakes fit
  onopen: ((ev?: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export class SteeringClient {
  vm: ViewModel;
  url: string;
  private factory: SocketFactory;
  private sock: SocketLike | null = null;
  private reconnectDelayMs: number;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  onchange: (() => void) | null = null;

  constructor(url: string, vm: ViewModel, factory: SocketFactory,
              reconnectDelayMs = 1000) {
    this.url = url;
    this.vm = vm;
    this.factory = factory;
    this.reconnectDelayMs = reconnectDelayMs;
  }

  get connected(): boolean {
    return this.vm.connection === "connected";
  }

  connect(): void {
    this.closed = false;
    this.vm.setConnection("connecting");
    const sock = this.factory(this.url);
    this.sock = sock;
    sock.onopen = () => {
      this.vm.setConnection("connected");
      this.onchange?.();
    };
    sock.onmessage = (ev) => {
      if (typeof ev.data !== "string") return;
      const msg = parseServerMessage(ev.data);
      if (msg !== null) {
        this.vm.ingest(msg);
        this.onchange?.();
      }
    };
    sock.onclose = () => {
      this.vm.setConnection("disconnected");
      this.onchange?.();
      this.sock = null;
      if (!this.closed) {
        this.timer = setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.sock?.close();
  }

  private send(payload: string): boolean {
    if (!this.connected || this.sock === null) return false;
    this.sock.send(payload);
    return true;
  }

  setMotion(motion: string): boolean {
    return this.send(commands.setMotion(motion));
  }

  perturb(dvx = 0.3, dvz = 0.0): boolean {
    return this.send(commands.perturb(dvx, dvz));
  }

  pause(): boolean { return this.send(commands.pause()); }
  resume(): boolean { return this.send(commands.resume()); }
  reset(): boolean { return this.send(commands.reset()); }
  setTimescale(v: number): boolean { return this.send(commands.setTimescale(v)); }
}
