/** Visit-count heatmap over (t, q) bins, exported as CSV for the exploration
 * comparison between progressive and non-progressive training. */

export class StateVisitLog {
  readonly counts: number[][];
  private readonly tEdges: number[];
  private readonly qEdges: number[];

  constructor(
    private horizon: number,
    private qMax: number,
    private nTBins = 50,
    private nQBins = 41,
  ) {
    this.counts = Array.from({ length: nTBins }, () => new Array<number>(nQBins).fill(0));
    this.tEdges = Array.from({ length: nTBins + 1 }, (_, i) => (horizon * i) / nTBins);
    this.qEdges = Array.from(
      { length: nQBins + 1 },
      (_, i) => -qMax + (2 * qMax * i) / nQBins,
    );
  }

  record(t: number, q: number): void {
    let ti = Math.floor((t / this.horizon) * this.counts.length);
    ti = Math.max(0, Math.min(this.counts.length - 1, ti));
    const qBins = this.counts[0].length;
    let qi = Math.floor(((q + this.qMax) / (2 * this.qMax)) * qBins);
    qi = Math.max(0, Math.min(qBins - 1, qi));
    this.counts[ti][qi] += 1;
  }

  recordAll(visits: Array<{ t: number; q: number }>): void {
    for (const v of visits) this.record(v.t, v.q);
  }

  /** CSV: header row of q-bin centers, one row per t bin (center first). */
  toCsv(): string {
    const qCenters = this.qEdges.slice(0, -1).map((lo, i) => (lo + this.qEdges[i + 1]) / 2);
    const lines = ["t_center," + qCenters.map((q) => q.toFixed(4)).join(",")];
    for (let ti = 0; ti < this.counts.length; ti++) {
      const tCenter = (this.tEdges[ti] + this.tEdges[ti + 1]) / 2;
      lines.push(tCenter.toFixed(4) + "," + this.counts[ti].join(","));
    }
    return lines.join("\n") + "\n";
  }
}
