import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { finetune, runCli, toMatrix, writeEmbeddings, writeLabels } from "../src/index.js";
import { matrixBytes } from "./helpers.js";

let dir: string;

beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), "nudge-finetune-"));
});

afterEach(() => {
  rmSync(dir, { recursive: true, force: true });
});

describe("finetune", () => {
  it("matches a direct CLI run on the worked magnitude instance", () => {
    const data = [[1, 0], [0, 1]];
    const queries = [[0, 1]];
    const labels = [{ query: 0, record: 0 }];

    const viaBindings = finetune(data, queries, labels, queries, labels, "m");

    const dataPath = join(dir, "data.emb");
    const queriesPath = join(dir, "queries.emb");
    const labelsPath = join(dir, "labels.tsv");
    const outPath = join(dir, "tuned.emb");
    const reportPath = join(dir, "report.json");
    writeEmbeddings(dataPath, toMatrix(data, "data"));
    writeEmbeddings(queriesPath, toMatrix(queries, "queries"));
    writeLabels(labelsPath, labels);
    runCli([
      "finetune",
      "--embeddings", dataPath,
      "--train-queries", queriesPath,
      "--train-labels", labelsPath,
      "--val-queries", queriesPath,
      "--val-labels", labelsPath,
      "--method", "m",
      "--out", outPath,
      "--report", reportPath,
    ]);
    const cliReport = JSON.parse(readFileSync(reportPath, "utf8"));

    expect(viaBindings.report.gamma_star).toBe(cliReport.gamma_star);
    expect(viaBindings.report.gamma_star).toBe(2.0);
    expect(viaBindings.report.val_correct_before).toBe(0);
    expect(viaBindings.report.val_correct_after).toBe(1);
    expect(Array.from(viaBindings.data.data)).toEqual([1, 2, 0, 1]);
  });

  it("returns data unchanged when the best radius is zero", () => {
    const data = [[1, 0], [0, 1]];
    const queries = [[1, 0]];
    const labels = [{ query: 0, record: 0 }];
    const result = finetune(data, queries, labels, queries, labels, "n", { gridPoints: 2 });
    expect(result.report.gamma_star).toBe(0.0);
    expect(matrixBytes(result.data).equals(matrixBytes(toMatrix(data, "data")))).toBe(true);
  });

  it("rejects a train query dim that disagrees with the data", () => {
    expect(() =>
      finetune([[1, 0]], [[1, 0, 0]], [{ query: 0, record: 0 }], [[1, 0]], [{ query: 0, record: 0 }], "m"),
    ).toThrow(/trainQueries has dim 3, data has dim 2/);
  });

  it("rejects a val query dim that disagrees with the data", () => {
    expect(() =>
      finetune([[1, 0]], [[1, 0]], [{ query: 0, record: 0 }], [[1]], [{ query: 0, record: 0 }], "m"),
    ).toThrow(/valQueries has dim 1, data has dim 2/);
  });

  it("surfaces CLI option errors with the CLI's message", () => {
    expect(() =>
      finetune([[1, 0]], [[1, 0]], [{ query: 0, record: 0 }], [[1, 0]], [{ query: 0, record: 0 }], "im"),
    ).toThrow("--alpha is required for --method im");
  });

  it("surfaces solver errors with the CLI's message", () => {
    const data = [[1, 0], [0, 1]];
    const queries = [[1, 0]];
    const multi = [{ query: 0, record: 0 }, { query: 0, record: 1 }];
    expect(() =>
      finetune(data, queries, [{ query: 0, record: 0 }], queries, multi, "m"),
    ).toThrow(/single-label validation queries/);
  });

  it("runs the iterative methods when given a schedule", () => {
    const data = [[1, 0], [0, 1]];
    const queries = [[0, 1]];
    const labels = [{ query: 0, record: 0 }];
    const result = finetune(data, queries, labels, queries, labels, "im", {
      alpha: 0.5,
      iters: 4,
      checkpointEvery: 1,
    });
    expect(result.report.method).toBe("im");
    expect(result.report.val_correct_after).toBe(1);
  });
});
