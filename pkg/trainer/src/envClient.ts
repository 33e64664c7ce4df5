/** TCP client for the flowhedge environment service (line-delimited JSON). */
import * as net from "node:net";
import * as readline from "node:readline";

export interface Observation {
  t: number;
  q: number;
  S: number;
}

export interface StepResult {
  obs: Observation;
  reward: number;
  done: boolean;
}

export interface EnvConfig {
  config?: Record<string, unknown>;
  t0?: number;
  seed?: number;
  include_state_only_reward_terms?: boolean;
  q0_sample?: "fixed" | "stationary_proxy";
}

/** Minimal environment surface the trainer needs; satisfied by EnvClient and
 * by in-process fakes in tests. */
export interface Env {
  configure(cfg: EnvConfig): Promise<number>; // returns steps per episode
  reset(): Promise<Observation>;
  step(v: number): Promise<StepResult>;
  close(): Promise<void>;
}

interface Pending {
  resolve: (msg: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

export class EnvProtocolError extends Error {
  constructor(public code: string, msg: string) {
    super(`${code}: ${msg}`);
  }
}

export class EnvClient implements Env {
  private socket!: net.Socket;
  private queue: Pending[] = [];
  private connected = false;

  constructor(private host: string, private port: number) {}

  async connect(): Promise<void> {
    if (this.connected) return;
    await new Promise<void>((resolve, reject) => {
      const socket = net.createConnection({ host: this.host, port: this.port });
      socket.once("connect", () => {
        this.socket = socket;
        this.connected = true;
        const rl = readline.createInterface({ input: socket });
        rl.on("line", (line) => this.onLine(line));
        socket.on("error", (err) => this.failAll(err));
        socket.on("close", () => {
          this.connected = false;
          this.failAll(new Error("connection closed"));
        });
        resolve();
      });
      socket.once("error", reject);
    });
  }

  private onLine(line: string): void {
    const pending = this.queue.shift();
    if (!pending) return;
    try {
      pending.resolve(JSON.parse(line));
    } catch (err) {
      pending.reject(err as Error);
    }
  }

  private failAll(err: Error): void {
    const waiting = this.queue;
    this.queue = [];
    for (const p of waiting) p.reject(err);
  }

  async request(msg: Record<string, unknown>): Promise<Record<string, unknown>> {
    await this.connect();
    const reply = await new Promise<Record<string, unknown>>((resolve, reject) => {
      this.queue.push({ resolve, reject });
      this.socket.write(JSON.stringify(msg) + "\n");
    });
    if (typeof reply.error === "string") {
      throw new EnvProtocolError(reply.error, String(reply.msg ?? ""));
    }
    return reply;
  }

  async configure(cfg: EnvConfig): Promise<number> {
    const reply = await this.request({ cmd: "configure", ...cfg });
    return reply.n_steps as number;
  }

  async reset(): Promise<Observation> {
    const reply = await this.request({ cmd: "reset" });
    return reply.obs as unknown as Observation;
  }

  async step(v: number): Promise<StepResult> {
    const reply = await this.request({ cmd: "step", v });
    return reply as unknown as StepResult;
  }

  async close(): Promise<void> {
    if (!this.connected) return;
    try {
      await this.request({ cmd: "close" });
    } catch {
      // server may close the pipe before replying
    }
    this.socket.destroy();
    this.connected = false;
  }
}

/** Reconnect-and-retry wrapper: transient connection losses re-establish the
 * session (configure + reset); persistent failures propagate so the caller
 * can checkpoint and abort. */
export class RobustEnv implements Env {
  private client: EnvClient;
  private lastConfig: EnvConfig | null = null;

  constructor(
    private host: string,
    private port: number,
    private maxRetries = 3,
  ) {
    this.client = new EnvClient(host, port);
  }

  async configure(cfg: EnvConfig): Promise<number> {
    this.lastConfig = cfg;
    return this.withRetry(() => this.client.configure(cfg), false);
  }

  async reset(): Promise<Observation> {
    return this.withRetry(() => this.client.reset(), true);
  }

  async step(v: number): Promise<StepResult> {
    // a lost connection mid-episode cannot resume the episode; restart it
    return this.withRetry(() => this.client.step(v), true);
  }

  async close(): Promise<void> {
    await this.client.close();
  }

  private async withRetry<T>(fn: () => Promise<T>, reconfigure: boolean): Promise<T> {
    let lastErr: Error | null = null;
    for (let attempt = 0; attempt <= this.maxRetries; attempt++) {
      try {
        return await fn();
      } catch (err) {
        if (err instanceof EnvProtocolError) throw err; // not transport trouble
        lastErr = err as Error;
        this.client = new EnvClient(this.host, this.port);
        if (reconfigure && this.lastConfig) {
          try {
            await this.client.configure(this.lastConfig);
          } catch {
            // next loop iteration retries from scratch
          }
        }
      }
    }
    throw new Error(`environment unreachable after ${this.maxRetries} retries: ${lastErr}`);
  }
}
