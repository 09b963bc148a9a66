import { readFileSync, writeFileSync } from "node:fs";

const MAGIC = "NUDG";
const VERSION = 1;
const HEADER_SIZE = 28;

export type Dtype = "f32" | "f64";

/**
 * Contiguous row-major matrix. Computation downstream is always float64;
 * `toMatrix` promotes float32 input at the boundary.
 */
export type Matrix = { rows: number; dim: number; data: Float64Array };

export type MatrixInput =
  | { rows: number; dim: number; data: Float64Array | Float32Array }
  | number[][];

export type Label = { query: number; record: number; relevance?: number };

/**
 * Normalize caller input into a Matrix, validating shape and finiteness.
 * Float64Array buffers are viewed as-is (zero copy); everything else is
 * copied.
 */
export function toMatrix(input: MatrixInput, name: string): Matrix {
  if (Array.isArray(input)) {
    const rows = input.length;
    if (rows === 0) {
      throw new Error(`${name} needs at least one row`);
    }
    const dim = input[0].length;
    if (dim === 0) {
      throw new Error(`${name} needs at least one column`);
    }
    const data = new Float64Array(rows * dim);
    for (let i = 0; i < rows; i++) {
      if (input[i].length !== dim) {
        throw new Error(`${name} row ${i} has ${input[i].length} values, expected ${dim}`);
      }
      data.set(input[i], i * dim);
    }
    return checkFinite({ rows, dim, data }, name);
  }
  const { rows, dim } = input;
  if (!Number.isInteger(rows) || rows < 1 || !Number.isInteger(dim) || dim < 1) {
    throw new Error(`${name} has invalid shape ${rows}x${dim}`);
  }
  if (input.data.length !== rows * dim) {
    throw new Error(
      `${name} buffer holds ${input.data.length} values, shape ${rows}x${dim} needs ${rows * dim}`,
    );
  }
  const data = input.data instanceof Float64Array ? input.data : Float64Array.from(input.data);
  return checkFinite({ rows, dim, data }, name);
}

function checkFinite(matrix: Matrix, name: string): Matrix {
  for (let i = 0; i < matrix.data.length; i++) {
    if (!Number.isFinite(matrix.data[i])) {
      throw new Error(`${name} contains NaN or Inf`);
    }
  }
  return matrix;
}

/** Write a matrix in the binary embedding container. */
export function writeEmbeddings(path: string, matrix: Matrix, dtype: Dtype = "f64"): void {
  const itemSize = dtype === "f64" ? 8 : 4;
  const buf = Buffer.alloc(HEADER_SIZE + matrix.rows * matrix.dim * itemSize);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt8(dtype === "f64" ? 2 : 1, 8);
  buf.writeBigUInt64LE(BigInt(matrix.rows), 12);
  buf.writeBigUInt64LE(BigInt(matrix.dim), 20);
  for (let i = 0; i < matrix.data.length; i++) {
    const offset = HEADER_SIZE + i * itemSize;
    if (dtype === "f64") {
      buf.writeDoubleLE(matrix.data[i], offset);
    } else {
      buf.writeFloatLE(matrix.data[i], offset);
    }
  }
  writeFileSync(path, buf);
}

/** Read the binary embedding container, promoting the body to float64. */
export function readEmbeddings(path: string): { matrix: Matrix; dtype: Dtype } {
  const blob = readFileSync(path);
  if (blob.length < HEADER_SIZE) {
    throw new Error(`${path}: truncated header (${blob.length} bytes)`);
  }
  const magic = blob.toString("ascii", 0, 4);
  if (magic !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unknown version ${version}`);
  }
  const code = blob.readUInt8(8);
  if (code !== 1 && code !== 2) {
    throw new Error(`${path}: unknown dtype code ${code}`);
  }
  if (blob.readUInt8(9) !== 0 || blob.readUInt8(10) !== 0 || blob.readUInt8(11) !== 0) {
    throw new Error(`${path}: nonzero header padding`);
  }
  const rows = Number(blob.readBigUInt64LE(12));
  const dim = Number(blob.readBigUInt64LE(20));
  if (rows === 0 || dim === 0) {
    throw new Error(`${path}: empty matrix (${rows}x${dim})`);
  }
  const dtype: Dtype = code === 2 ? "f64" : "f32";
  const itemSize = code === 2 ? 8 : 4;
  const body = blob.length - HEADER_SIZE;
  const expected = rows * dim * itemSize;
  if (body !== expected) {
    throw new Error(`${path}: body is ${body} bytes, expected ${expected}`);
  }
  const data = new Float64Array(rows * dim);
  for (let i = 0; i < data.length; i++) {
    const offset = HEADER_SIZE + i * itemSize;
    data[i] = code === 2 ? blob.readDoubleLE(offset) : blob.readFloatLE(offset);
    if (!Number.isFinite(data[i])) {
      throw new Error(`${path}: body contains non-finite values`);
    }
  }
  return { matrix: { rows, dim, data }, dtype };
}

/** Write labels as tab-separated `query record [relevance]` lines. */
export function writeLabels(path: string, labels: Label[]): void {
  const lines: string[] = [];
  for (const { query, record, relevance } of labels) {
    if (!Number.isInteger(query) || query < 0) {
      throw new Error(`label query index must be a non-negative integer, got ${query}`);
    }
    if (!Number.isInteger(record) || record < 0) {
      throw new Error(`label record index must be a non-negative integer, got ${record}`);
    }
    if (relevance === undefined) {
      lines.push(`${query}\t${record}`);
    } else {
      if (!Number.isFinite(relevance) || relevance <= 0) {
        throw new Error(`label relevance must be positive and finite, got ${relevance}`);
      }
      lines.push(`${query}\t${record}\t${relevance}`);
    }
  }
  writeFileSync(path, lines.join("\n") + "\n");
}
