/**
 * Bindings for the histdelta pipeline, for use from Node/TypeScript
 * training loops. Every operation goes through the pipeline's external
 * interfaces: the `histdelta` command line and its JSONL file formats.
 * Nothing here re-implements pipeline logic, so outputs are byte-for-byte
 * identical to direct CLI invocations on the same inputs.
 */

import { spawnSync } from "node:child_process";
import { createReadStream, mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { createInterface } from "node:readline";

export interface TrajectoryRecord {
  id: string;
  instruction: string;
  observations: string[];
  actions: string[];
}

export interface SampleMeta {
  trajectory_id: string;
  window_start: number;
  h: number;
  format: string;
  truncated: boolean;
  tokens_unpadded: number;
}

export interface SampleRecord {
  tokens: number[];
  mask: number[];
  meta: SampleMeta;
}

export interface Manifest {
  sample_count: number;
  supervised_tokens: number;
  context_length: number;
  format: string;
  objective: string;
  "Total Tokens": number;
  [key: string]: number | string | boolean;
}

export interface AssembledPrompt {
  chosen_h: number;
  token_count: number;
  degraded: boolean;
  tokens: number[];
  text: string;
}

export type HistoryFormat = "full" | "diff";

export interface CliOptions {
  /** Override the command, e.g. ["histdelta"]; default "python3 -m histdelta". */
  command?: string[];
}

export class CliError extends Error {
  constructor(
    public readonly args: string[],
    public readonly exitCode: number,
    public readonly stderr: string,
  ) {
    super(`histdelta ${args[0]} exited with code ${exitCode}: ${stderr.trim()}`);
  }
}

function cliCommand(opts?: CliOptions): string[] {
  if (opts?.command) return opts.command;
  const fromEnv = process.env.HISTDELTA_CLI;
  if (fromEnv) return fromEnv.split(" ").filter(Boolean);
  return ["python3", "-m", "histdelta"];
}

/** Run one CLI subcommand, returning raw stdout bytes. */
export function runCli(args: string[], opts?: CliOptions): Buffer {
  const [head, ...rest] = cliCommand(opts);
  const result = spawnSync(head, [...rest, ...args], {
    maxBuffer: 1 << 28,
  });
  if (result.error) throw result.error;
  if (result.status !== 0) {
    throw new CliError(args, result.status ?? -1, result.stderr.toString("utf-8"));
  }
  return result.stdout;
}

function withTempRecord<T>(record: TrajectoryRecord, fn: (path: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "histdelta-"));
  try {
    const path = join(dir, "record.jsonl");
    writeFileSync(path, JSON.stringify(record) + "\n", "utf-8");
    return fn(path);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export interface ConvertOptions extends CliOptions {
  format?: HistoryFormat;
  delimiter?: string;
}

/** Render one trajectory record as full-text or delta-form history text. */
export function convertTrajectory(
  record: TrajectoryRecord,
  opts: ConvertOptions = {},
): string {
  return withTempRecord(record, (path) => {
    const args = ["convert", path, "--format", opts.format ?? "diff", "--raw"];
    if (opts.delimiter) args.push("--delimiter", opts.delimiter);
    return runCli(args, opts).toString("utf-8");
  });
}

export interface ChunkOptions extends CliOptions {
  horizon: number;
  format?: HistoryFormat;
  objective?: "action-only" | "action-world";
  context?: number;
  tokenizer?: string;
  sampling?: "contiguous" | "random";
  count?: number;
  seed?: number;
  jobs?: number;
}

/** Emit a training dataset from a trajectory file; returns the manifest. */
export function chunkDataset(
  input: string,
  output: string,
  opts: ChunkOptions,
): Manifest {
  const args = [
    "chunk", input, output,
    "--horizon", String(opts.horizon),
    "--format", opts.format ?? "diff",
    "--objective", opts.objective ?? "action-only",
    "--context", String(opts.context ?? 4096),
  ];
  if (opts.tokenizer) args.push("--tokenizer", opts.tokenizer);
  if (opts.sampling) args.push("--sampling", opts.sampling);
  if (opts.count !== undefined) args.push("--count", String(opts.count));
  if (opts.seed !== undefined) args.push("--seed", String(opts.seed));
  if (opts.jobs !== undefined) args.push("--jobs", String(opts.jobs));
  return JSON.parse(runCli(args, opts).toString("utf-8")) as Manifest;
}

export interface PromptOptions extends CliOptions {
  hMax: number;
  budget: number;
  format?: HistoryFormat;
  tokenizer?: string;
  allowTruncated?: boolean;
}

/**
 * Build a token-budgeted prompt from a trajectory prefix (one more
 * observation than actions). The returned text ends with the action marker.
 */
export function buildPrompt(
  record: TrajectoryRecord,
  opts: PromptOptions,
): AssembledPrompt {
  return withTempRecord(record, (path) => {
    const args = [
      "assemble", path,
      "--h-max", String(opts.hMax),
      "--budget", String(opts.budget),
      "--format", opts.format ?? "diff",
      "--json",
    ];
    if (opts.tokenizer) args.push("--tokenizer", opts.tokenizer);
    if (opts.allowTruncated) args.push("--allow-truncated");
    return JSON.parse(runCli(args, opts).toString("utf-8")) as AssembledPrompt;
  });
}

export interface StatsOptions extends CliOptions {
  format?: HistoryFormat;
  tokenizer?: string;
}

/** Token statistics (per demo / observation / action) over a trajectory file. */
export function tokenStats(
  input: string,
  opts: StatsOptions = {},
): Record<string, number> {
  const args = ["stats", input, "--format", opts.format ?? "full", "--json"];
  if (opts.tokenizer) args.push("--tokenizer", opts.tokenizer);
  return JSON.parse(runCli(args, opts).toString("utf-8")) as Record<string, number>;
}

/** Stream (tokens, mask, meta) records from an emitted sample file. */
export async function* iterSamples(path: string): AsyncGenerator<SampleRecord> {
  const reader = createInterface({
    input: createReadStream(path, { encoding: "utf-8" }),
    crlfDelay: Infinity,
  });
  let lineNo = 0;
  for await (const line of reader) {
    lineNo += 1;
    if (!line.trim()) continue;
    let record: SampleRecord;
    try {
      record = JSON.parse(line) as SampleRecord;
    } catch (err) {
      throw new Error(`${path}:${lineNo}: broken sample record: ${err}`);
    }
    if (!Array.isArray(record.tokens) || !Array.isArray(record.mask) || !record.meta) {
      throw new Error(`${path}:${lineNo}: broken sample record: missing fields`);
    }
    yield record;
  }
}

/** An emitted sample file; iteration order matches the file order. */
export class BoundDataset implements AsyncIterable<SampleRecord> {
  constructor(public readonly path: string) {}

  [Symbol.asyncIterator](): AsyncIterator<SampleRecord> {
    return iterSamples(this.path);
  }

  async collect(): Promise<SampleRecord[]> {
    const out: SampleRecord[] = [];
    for await (const record of this) out.push(record);
    return out;
  }

  /** Total supervised-token count; cross-checks the manifest. */
  async maskSum(): Promise<number> {
    let total = 0;
    for await (const record of this) {
      for (const bit of record.mask) total += bit;
    }
    return total;
  }
}
