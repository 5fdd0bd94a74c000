/** Word-level diff between the recognizer's line and the corrected line.
 *
 * Based on a longest-common-subsequence alignment; adjacent delete/insert
 * runs are paired into substitutions so one changed word highlights as
 * exactly one token pair.
 */

export type DiffKind = "same" | "sub" | "del" | "ins";

export interface DiffToken {
  kind: DiffKind;
  /** word from the raw (model) line, absent for insertions */
  raw?: string;
  /** word from the corrected line, absent for deletions */
  corrected?: string;
}

function splitWords(text: string): string[] {
  return text.split(/\s+/).filter((w) => w.length > 0);
}

export function diffWords(rawLine: string, correctedLine: string): DiffToken[] {
  const a = splitWords(rawLine);
  const b = splitWords(correctedLine);
  // LCS table
  const m = a.length;
  const n = b.length;
  const lcs: number[][] = Array.from({ length: m + 1 }, () => new Array(n + 1).fill(0));
  for (let i = m - 1; i >= 0; i--) {
    for (let j = n - 1; j >= 0; j--) {
      lcs[i][j] = a[i] === b[j] ? lcs[i + 1][j + 1] + 1 : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  // walk the table, collecting runs of deletions/insertions between matches
  const out: DiffToken[] = [];
  let i = 0;
  let j = 0;
  let dels: string[] = [];
  let inss: string[] = [];
  const flush = () => {
    const pairs = Math.min(dels.length, inss.length);
    for (let k = 0; k < pairs; k++) out.push({ kind: "sub", raw: dels[k], corrected: inss[k] });
    for (let k = pairs; k < dels.length; k++) out.push({ kind: "del", raw: dels[k] });
    for (let k = pairs; k < inss.length; k++) out.push({ kind: "ins", corrected: inss[k] });
    dels = [];
    inss = [];
  };
  while (i < m && j < n) {
    if (a[i] === b[j]) {
      flush();
      out.push({ kind: "same", raw: a[i], corrected: b[j] });
      i++;
      j++;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      dels.push(a[i++]);
    } else {
      inss.push(b[j++]);
    }
  }
  while (i < m) dels.push(a[i++]);
  while (j < n) inss.push(b[j++]);
  flush();
  return out;
}

/** Count of non-"same" tokens: what the review UI highlights. */
export function highlightCount(tokens: DiffToken[]): number {
  return tokens.filter((t) => t.kind !== "same").length;
}
