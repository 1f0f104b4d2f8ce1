// Analysis dashboard: tonality badges, metric gauges, intended-vs-classified
// consistency flags, and free-text slots for the observation loop (saved into
// the report request).
import type { StudioSession } from "../socket.js";

const DIMENSIONS = ["spatial", "temporal", "weight", "flow"] as const;
const METRICS: [key: string, label: string, lo: number, hi: number][] = [
  ["directness", "directness", 0, 1],
  ["temporal_skew", "temporal skew", -1, 1],
  ["weight_index", "weight index", 0, 1],
  ["smoothness_ldj", "smoothness (LDJ)", -16, 0],
  ["vertical_drop_ratio", "vertical drop", -1, 1],
];

export class MoaPanel {
  private badges: HTMLElement;
  private gauges: HTMLElement;
  private flags: HTMLElement;
  private impressions: HTMLTextAreaElement;
  private meaning: HTMLTextAreaElement;
  private intendedSelects = new Map<string, HTMLSelectElement>();
  private empty: HTMLElement;

  constructor(private root: HTMLElement, private session: StudioSession) {
    this.empty = document.createElement("div");
    this.empty.className = "empty";
    this.empty.textContent = "play a sequence first, then analyze its log";

    this.badges = document.createElement("div");
    this.badges.className = "badges";
    this.gauges = document.createElement("div");
    this.gauges.className = "gauges";
    this.flags = document.createElement("div");
    this.flags.className = "flags";

    this.impressions = this.textSlot("impressions (step 1: what does it feel like?)");
    this.meaning = this.textSlot("meaning (step 3: does the reading hold together?)");

    const intentRow = document.createElement("div");
    intentRow.className = "intent-row";
    const options: Record<string, string[]> = {
      spatial: ["", "unidirectional", "multidirectional", "neutral"],
      temporal: ["", "accelerated", "decelerated", "neutral"],
      weight: ["", "light", "strong", "heavy"],
      flow: ["", "controlled", "unhindered"],
    };
    for (const dim of DIMENSIONS) {
      const label = document.createElement("label");
      label.textContent = dim;
      const select = document.createElement("select");
      for (const opt of options[dim]) {
        const o = document.createElement("option");
        o.value = opt;
        o.textContent = opt || "(no intent)";
        select.appendChild(o);
      }
      label.appendChild(select);
      intentRow.appendChild(label);
      this.intendedSelects.set(dim, select);
    }

    const analyze = document.createElement("button");
    analyze.textContent = "analyze last log";
    analyze.addEventListener("click", () => this.requestReport());

    root.append(
      this.empty,
      this.badges,
      this.gauges,
      this.flags,
      intentRow,
      this.impressions,
      this.meaning,
      analyze,
    );
  }

  private textSlot(placeholder: string): HTMLTextAreaElement {
    const area = document.createElement("textarea");
    area.placeholder = placeholder;
    area.rows = 2;
    return area;
  }

  private requestReport(): void {
    const logId = this.session.state.lastLogId;
    if (!logId) return;
    const intended: Record<string, string> = {};
    for (const [dim, select] of this.intendedSelects) {
      if (select.value) intended[dim] = select.value;
    }
    void this.session.analyze(
      logId,
      intended,
      this.impressions.value || undefined,
      this.meaning.value || undefined,
    );
  }

  render(): void {
    const report = this.session.state.report;
    this.empty.style.display = report ? "none" : "block";
    this.badges.innerHTML = "";
    this.gauges.innerHTML = "";
    this.flags.innerHTML = "";
    if (!report) return;

    const classification = report.analysis.classification;
    for (const dim of DIMENSIONS) {
      const badge = document.createElement("span");
      const mismatch = report.inconsistencies.includes(dim);
      badge.className = mismatch ? "tonality mismatch" : "tonality";
      badge.textContent = `${dim}: ${classification[dim]}`;
      badge.title = mismatch ? "differs from the declared intent" : "";
      this.badges.appendChild(badge);
    }

    const profile = report.analysis.profile as unknown as Record<string, number>;
    for (const [key, label, lo, hi] of METRICS) {
      const row = document.createElement("div");
      row.className = "gauge";
      const value = profile[key];
      const frac = Math.max(0, Math.min(1, (value - lo) / (hi - lo)));
      row.innerHTML =
        `<span class="g-label">${label}</span>` +
        `<span class="g-bar"><span class="g-fill" style="width:${(frac * 100).toFixed(1)}%"></span></span>` +
        `<span class="g-value">${value.toFixed(3)}</span>`;
      this.gauges.appendChild(row);
    }

    if (report.inconsistencies.length) {
      this.flags.textContent =
        `intent mismatch on: ${report.inconsistencies.join(", ")} — ` +
        "revisit the motion or the reading (the loop goes around again)";
    } else if (report.intended && Object.keys(report.intended).length) {
      this.flags.textContent = "classified tonalities match the declared intent";
    } else {
      this.flags.textContent = "";
    }
  }
}
