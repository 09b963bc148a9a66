import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { runCli } from "./cli.js";
import {
  Label,
  Matrix,
  MatrixInput,
  readEmbeddings,
  toMatrix,
  writeEmbeddings,
  writeLabels,
} from "./format.js";

export { cliCommand, runCli } from "./cli.js";
export * from "./format.js";

export type Method = "m" | "n" | "n-exact" | "im" | "in";

export type FinetuneOptions = {
  gridPoints?: number;
  alpha?: number;
  iters?: number;
  checkpointEvery?: number;
  weightedLabels?: boolean;
  threads?: number;
};

export type TuneReport = {
  method: string;
  gamma_star: number;
  val_correct_before: number;
  val_correct_after: number;
  n: number;
  d: number;
  n_train: number;
  n_val: number;
  config: Record<string, unknown>;
  timings_ms: Record<string, number>;
};

export type Metrics = {
  k: number;
  n_queries: number;
  recall: number;
  ndcg: number;
  recall_at_1: number;
};

export type FinetuneResult = { data: Matrix; report: TuneReport };

/**
 * Tune record embeddings against labeled train/validation queries.
 * Inputs stay in memory on this side; the native core sees temp files that
 * are removed before returning. Float64 values round-trip bit-exactly.
 */
export function finetune(
  data: MatrixInput,
  trainQueries: MatrixInput,
  trainLabels: Label[],
  valQueries: MatrixInput,
  valLabels: Label[],
  method: Method,
  options: FinetuneOptions = {},
): FinetuneResult {
  const records = toMatrix(data, "data");
  const trainQ = toMatrix(trainQueries, "trainQueries");
  const valQ = toMatrix(valQueries, "valQueries");
  if (trainQ.dim !== records.dim) {
    throw new Error(`trainQueries has dim ${trainQ.dim}, data has dim ${records.dim}`);
  }
  if (valQ.dim !== records.dim) {
    throw new Error(`valQueries has dim ${valQ.dim}, data has dim ${records.dim}`);
  }
  const dir = mkdtempSync(join(tmpdir(), "nudge-bindings-"));
  try {
    const dataPath = join(dir, "data.emb");
    const trainQPath = join(dir, "train_queries.emb");
    const trainLPath = join(dir, "train_labels.tsv");
    const valQPath = join(dir, "val_queries.emb");
    const valLPath = join(dir, "val_labels.tsv");
    const outPath = join(dir, "tuned.emb");
    const reportPath = join(dir, "report.json");
    writeEmbeddings(dataPath, records);
    writeEmbeddings(trainQPath, trainQ);
    writeLabels(trainLPath, trainLabels);
    writeEmbeddings(valQPath, valQ);
    writeLabels(valLPath, valLabels);
    const args = [
      "finetune",
      "--embeddings", dataPath,
      "--train-queries", trainQPath,
      "--train-labels", trainLPath,
      "--val-queries", valQPath,
      "--val-labels", valLPath,
      "--method", method,
      "--out", outPath,
      "--report", reportPath,
    ];
    if (options.gridPoints !== undefined) {
      args.push("--grid-points", String(options.gridPoints));
    }
    if (options.alpha !== undefined) {
      args.push("--alpha", String(options.alpha));
    }
    if (options.iters !== undefined) {
      args.push("--iters", String(options.iters));
    }
    if (options.checkpointEvery !== undefined) {
      args.push("--checkpoint-every", String(options.checkpointEvery));
    }
    if (options.weightedLabels) {
      args.push("--weighted-labels");
    }
    if (options.threads !== undefined) {
      args.push("--threads", String(options.threads));
    }
    runCli(args);
    const tuned = readEmbeddings(outPath).matrix;
    const report = JSON.parse(readFileSync(reportPath, "utf8")) as TuneReport;
    return { data: tuned, report };
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Mean Recall@k, NDCG@k, and Recall@1 of data against labeled queries. */
export function evaluate(
  data: MatrixInput,
  queries: MatrixInput,
  labels: Label[],
  k = 10,
): Metrics {
  const records = toMatrix(data, "data");
  const q = toMatrix(queries, "queries");
  if (q.dim !== records.dim) {
    throw new Error(`queries has dim ${q.dim}, data has dim ${records.dim}`);
  }
  const dir = mkdtempSync(join(tmpdir(), "nudge-bindings-"));
  try {
    const dataPath = join(dir, "data.emb");
    const queriesPath = join(dir, "queries.emb");
    const labelsPath = join(dir, "labels.tsv");
    writeEmbeddings(dataPath, records);
    writeEmbeddings(queriesPath, q);
    writeLabels(labelsPath, labels);
    const stdout = runCli([
      "eval",
      "--embeddings", dataPath,
      "--queries", queriesPath,
      "--labels", labelsPath,
      "--k", String(k),
    ]);
    return JSON.parse(stdout) as Metrics;
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
