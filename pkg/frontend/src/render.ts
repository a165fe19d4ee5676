// Renderers: one per technique plus the shared ticker/metrics chrome.
// All selection semantics come from the engine; these only draw the most
// recent state message.

import type { SessionView } from "./client.js";
import type { EngineEvent, SelectedMessage } from "./protocol.js";
import { PX_PER_METER } from "./input.js";

export interface LaneView {
  lane: number;
  opacity: number;
  active: boolean;
}

/** Per-lane opacity for a state message: the active lane stays solid while
 * every other lane fades with the dwell fraction. */
export function laneViews(
  nLanes: number,
  active: number | string | null,
  dwellFraction: number,
): LaneView[] {
  const half = Math.floor(nLanes / 2);
  const views: LaneView[] = [];
  for (let lane = -half; lane <= half; lane++) {
    const isActive = active === lane;
    views.push({
      lane,
      active: isActive,
      opacity: isActive ? 1 : 1 - dwellFraction,
    });
  }
  return views;
}

export class WalklineRenderer {
  private lanes = new Map<number, HTMLElement>();

  constructor(
    private root: HTMLElement,
    private nLanes: number,
    private target: number | null = null,
    totalWidth = 1.0,
  ) {
    const doc = root.ownerDocument;
    root.textContent = "";
    root.classList.add("lane-track");
    const laneWidthPx = (totalWidth / (nLanes + 1)) * PX_PER_METER;
    const half = Math.floor(nLanes / 2);
    for (let lane = -half; lane <= half; lane++) {
      const el = doc.createElement("div");
      el.className = lane === 0 ? "lane null-lane" : "lane";
      el.dataset.lane = String(lane);
      el.style.width = `${laneWidthPx}px`;
      if (lane === this.target) {
        el.classList.add("target");
      }
      root.appendChild(el);
      this.lanes.set(lane, el);
    }
  }

  render(view: SessionView): void {
    for (const laneView of laneViews(this.nLanes, view.active, view.dwellFraction)) {
      const el = this.lanes.get(laneView.lane);
      if (!el) continue;
      el.style.opacity = String(laneView.opacity);
      el.classList.toggle("active", laneView.active);
    }
  }
}

export class FootGridRenderer {
  private cells = new Map<string, SVGPathElement>();

  constructor(
    private root: HTMLElement,
    rows: number,
    cols: number,
    rowHeight = 0.085,
    innerRadius = 0.15,
    private indirect = false,
  ) {
    const doc = root.ownerDocument;
    root.textContent = "";
    const svgNs = "http://www.w3.org/2000/svg";
    const svg = doc.createElementNS(svgNs, "svg");
    const outer = (innerRadius + rows * rowHeight) * PX_PER_METER;
    svg.setAttribute("width", String(2 * outer));
    svg.setAttribute("height", String(outer));
    svg.setAttribute("viewBox", `${-outer} ${-outer} ${2 * outer} ${outer}`);
    if (indirect) {
      // Indirect mode floats the panel; the floor grid itself is hidden.
      svg.setAttribute("class", "floating-panel");
    }
    for (let row = 1; row <= rows; row++) {
      for (let col = 1; col <= cols; col++) {
        const path = doc.createElementNS(svgNs, "path") as SVGPathElement;
        const rLo = (innerRadius + (row - 1) * rowHeight) * PX_PER_METER;
        const rHi = (innerRadius + row * rowHeight) * PX_PER_METER;
        const thetaHi = Math.PI - ((col - 1) * Math.PI) / cols;
        const thetaLo = Math.PI - (col * Math.PI) / cols;
        path.setAttribute("d", annularSector(rLo, rHi, thetaLo, thetaHi));
        path.setAttribute("class", "grid-cell");
        path.dataset.cell = `r${row}c${col}`;
        svg.appendChild(path);
        this.cells.set(`r${row}c${col}`, path);
      }
    }
    root.appendChild(svg);
  }

  render(view: SessionView): void {
    for (const [key, el] of this.cells) {
      el.classList.toggle("active", view.active === key);
    }
  }
}

function annularSector(rLo: number, rHi: number, thetaLo: number, thetaHi: number): string {
  // Screen y grows downward; the grid is drawn ahead of the anchor (up).
  const point = (r: number, theta: number) =>
    `${(r * Math.cos(theta)).toFixed(2)} ${(-r * Math.sin(theta)).toFixed(2)}`;
  return (
    `M ${point(rLo, thetaLo)} ` +
    `A ${rLo.toFixed(2)} ${rLo.toFixed(2)} 0 0 0 ${point(rLo, thetaHi)} ` +
    `L ${point(rHi, thetaHi)} ` +
    `A ${rHi.toFixed(2)} ${rHi.toFixed(2)} 0 0 1 ${point(rHi, thetaLo)} Z`
  );
}

export class LayerStackRenderer {
  private layers: HTMLElement[] = [];

  constructor(private root: HTMLElement, nLayers: number) {
    const doc = root.ownerDocument;
    root.textContent = "";
    root.classList.add("layer-stack");
    // Layer 0 is nearest the body and drawn at the bottom.
    for (let i = nLayers - 1; i >= 0; i--) {
      const el = doc.createElement("div");
      el.className = "layer";
      el.dataset.layer = String(i);
      el.textContent = `layer ${i}`;
      root.appendChild(el);
      this.layers.push(el);
    }
  }

  render(view: SessionView): void {
    for (const el of this.layers) {
      el.classList.toggle("active", view.active === Number(el.dataset.layer));
    }
  }
}

export class Chrome {
  private tickerList: HTMLElement;
  private metricsCard: HTMLElement;
  private banner: HTMLElement;
  private seen = 0;

  constructor(root: HTMLElement) {
    const doc = root.ownerDocument;
    this.tickerList = doc.createElement("ul");
    this.tickerList.className = "ticker";
    this.metricsCard = doc.createElement("div");
    this.metricsCard.className = "metrics-card hidden";
    this.banner = doc.createElement("div");
    this.banner.className = "banner hidden";
    root.append(this.banner, this.metricsCard, this.tickerList);
  }

  render(view: SessionView): void {
    for (; this.seen < view.ticker.length; this.seen++) {
      this.appendEvent(view.ticker[this.seen]);
    }
    if (view.selected) {
      this.showMetrics(view.selected);
    }
    if (view.error) {
      this.banner.textContent = view.error;
      this.banner.classList.remove("hidden");
    } else if (!view.connected) {
      this.banner.textContent = "disconnected - reload to reconnect";
      this.banner.classList.remove("hidden");
    } else {
      this.banner.classList.add("hidden");
    }
  }

  private appendEvent(event: EngineEvent): void {
    const item = this.tickerList.ownerDocument.createElement("li");
    const where = event.lane ?? event.layer;
    item.textContent =
      where === undefined ? event.kind : `${event.kind} ${where}`;
    this.tickerList.appendChild(item);
  }

  private showMetrics(selected: SelectedMessage): void {
    const m = selected.metrics;
    this.metricsCard.textContent =
      `selected lane ${selected.target} | ` +
      `tct ${m.tct === null ? "n/a" : m.tct.toFixed(3) + " s"} | ` +
      `walked ${m.walked_distance.toFixed(2)} m | ` +
      (m.stabilizing_error ? `stabilizing error (${m.error_kind})` : "clean hold");
    this.metricsCard.classList.remove("hidden");
    this.metricsCard.classList.add("flash");
  }
}

/** The 1 m scale ruler that keeps the fixed px-per-meter scale honest. */
export function buildRuler(root: HTMLElement): void {
  const doc = root.ownerDocument;
  const ruler = doc.createElement("div");
  ruler.className = "ruler";
  ruler.style.width = `${PX_PER_METER}px`;
  ruler.textContent = "1 m";
  root.appendChild(ruler);
}
