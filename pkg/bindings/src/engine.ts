/**
 * Engine process management: line-delimited JSON over stdin/stdout.
 *
 * Each request is self-contained; the engine keeps no state between calls,
 * so a session is purely a transport optimization (one interpreter start
 * amortized over many calls).  Requests are answered strictly in order,
 * which makes a FIFO resolver queue sufficient.
 */

import { type ChildProcessWithoutNullStreams, spawn } from "node:child_process";

import { EngineError, ShapeError } from "./types.js";

/** How to start the engine; override via options or SEGCHAIN_FFI_CMD. */
const DEFAULT_COMMAND = ["python3", "-m", "segchain", "ffi"];

export interface EngineOptions {
  /** argv of the engine process, e.g. ["segchain", "ffi"]. */
  readonly command?: readonly string[];
}

function engineCommand(options?: EngineOptions): readonly string[] {
  if (options?.command) return options.command;
  const fromEnv = process.env["SEGCHAIN_FFI_CMD"];
  if (fromEnv) return fromEnv.split(/\s+/).filter(Boolean);
  return DEFAULT_COMMAND;
}

interface Pending {
  resolve: (value: Record<string, unknown>) => void;
  reject: (reason: Error) => void;
}

export class EngineSession {
  private readonly child: ChildProcessWithoutNullStreams;
  private readonly pending: Pending[] = [];
  private buffer = "";
  private stderr = "";
  private closed = false;

  constructor(options?: EngineOptions) {
    const [cmd, ...args] = engineCommand(options);
    if (!cmd) throw new EngineError("empty engine command");
    this.child = spawn(cmd, args, { stdio: ["pipe", "pipe", "pipe"] });
    this.child.stdout.setEncoding("utf-8");
    this.child.stderr.setEncoding("utf-8");
    this.child.stdout.on("data", (chunk: string) => this.onData(chunk));
    this.child.stderr.on("data", (chunk: string) => {
      this.stderr += chunk;
    });
    this.child.on("error", (err) => this.failAll(new EngineError(err.message)));
    this.child.on("close", (code) => {
      if (this.pending.length > 0) {
        this.failAll(new EngineError(
          `engine exited with code ${code} before answering` +
          (this.stderr ? `: ${this.stderr.trim()}` : "")));
      }
    });
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let newline;
    while ((newline = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, newline);
      this.buffer = this.buffer.slice(newline + 1);
      const waiter = this.pending.shift();
      if (!waiter) continue; // ignore unsolicited output
      try {
        waiter.resolve(JSON.parse(line) as Record<string, unknown>);
      } catch (err) {
        waiter.reject(new EngineError(`bad response line: ${String(err)}`));
      }
    }
  }

  private failAll(error: Error): void {
    while (this.pending.length > 0) {
      this.pending.shift()!.reject(error);
    }
  }

  /**
   * Send one raw request object and await its response object.  Error
   * responses become {@link ShapeError} (when the engine names an array) or
   * {@link EngineError}.
   */
  async request(payload: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.closed) throw new EngineError("session is closed");
    const response = await new Promise<Record<string, unknown>>((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.child.stdin.write(JSON.stringify(payload) + "\n", (err) => {
        if (err) this.failAll(new EngineError(err.message));
      });
    });
    if (response["ok"] !== true) {
      const message = String(response["error"] ?? "engine error");
      if (typeof response["array"] === "string") {
        throw new ShapeError(
          response["array"],
          (response["expected"] as (number | string)[]) ?? [],
          (response["actual"] as number[]) ?? [],
        );
      }
      throw new EngineError(message);
    }
    return response;
  }

  /** Close stdin and wait for the engine to exit. */
  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    const done = new Promise<void>((resolve) => {
      this.child.once("close", () => resolve());
    });
    this.child.stdin.end();
    await done;
  }
}

/** Run one request in a fresh engine process (spawn, ask, close). */
export async function oneShot(
  payload: Record<string, unknown>,
  options?: EngineOptions,
): Promise<Record<string, unknown>> {
  const session = new EngineSession(options);
  try {
    return await session.request(payload);
  } finally {
    await session.close();
  }
}
