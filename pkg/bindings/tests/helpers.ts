import { Label, Matrix } from "../src/format.js";

/** Deterministic PRNG (mulberry32) so instances are stable across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function gaussian(rand: () => number): number {
  let u = 0;
  while (u === 0) {
    u = rand();
  }
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * rand());
}

export function unitRows(rand: () => number, n: number, d: number): number[][] {
  const rows: number[][] = [];
  for (let i = 0; i < n; i++) {
    const row = new Array<number>(d);
    let norm = 0;
    while (norm <= 1e-6) {
      for (let j = 0; j < d; j++) {
        row[j] = gaussian(rand);
      }
      norm = Math.hypot(...row);
    }
    rows.push(row.map((v) => v / norm));
  }
  return rows;
}

export function singleLabels(rand: () => number, nQueries: number, nRecords: number): Label[] {
  const labels: Label[] = [];
  for (let q = 0; q < nQueries; q++) {
    labels.push({ query: q, record: Math.floor(rand() * nRecords) });
  }
  return labels;
}

/**
 * Count queries whose labeled record strictly out-scores every other record
 * under the inner product. Matches the core's top-1 correctness rule.
 */
export function top1Correct(data: Matrix, queries: Matrix, labels: Label[]): number {
  const target = new Map<number, number>();
  for (const label of labels) {
    target.set(label.query, label.record);
  }
  let correct = 0;
  for (let qi = 0; qi < queries.rows; qi++) {
    const t = target.get(qi);
    if (t === undefined) {
      continue;
    }
    const scores = new Float64Array(data.rows);
    for (let ri = 0; ri < data.rows; ri++) {
      let s = 0;
      for (let j = 0; j < data.dim; j++) {
        s += queries.data[qi * queries.dim + j] * data.data[ri * data.dim + j];
      }
      scores[ri] = s;
    }
    let wins = true;
    for (let ri = 0; ri < data.rows; ri++) {
      if (ri !== t && scores[ri] >= scores[t]) {
        wins = false;
        break;
      }
    }
    if (wins) {
      correct++;
    }
  }
  return correct;
}

export function matrixBytes(matrix: Matrix): Buffer {
  return Buffer.from(matrix.data.buffer, matrix.data.byteOffset, matrix.data.byteLength);
}
