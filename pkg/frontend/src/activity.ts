/** Activity chart: daily event counts from GET /v1/activity rendered as an
 * inline SVG bar chart. */

import { ApiClient } from "./api.js";
import type { ActivityBucket } from "./types.js";

const WIDTH = 480;
const HEIGHT = 120;
const SVG_NS = "http://www.w3.org/2000/svg";

export class ActivityChart {
  readonly element: HTMLElement;

  constructor(private readonly api: ApiClient) {
    this.element = document.createElement("section");
    this.element.className = "activity";
    const heading = document.createElement("h2");
    heading.textContent = "Your activity";
    this.element.appendChild(heading);
  }

  async refresh(): Promise<ActivityBucket[]> {
    const buckets = await this.api.getActivity();
    this.render(buckets);
    return buckets;
  }

  private render(buckets: ActivityBucket[]): void {
    this.element.querySelector("svg")?.remove();
    this.element.querySelector(".empty-state")?.remove();
    if (buckets.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = "No activity yet.";
      this.element.appendChild(empty);
      return;
    }
    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
    svg.setAttribute("role", "img");
    const maxEvents = Math.max(...buckets.map((b) => b.events), 1);
    const span = Math.max(...buckets.map((b) => b.day)) + 1;
    const barWidth = WIDTH / span;
    for (const bucket of buckets) {
      const bar = document.createElementNS(SVG_NS, "rect");
      const barHeight = (bucket.events / maxEvents) * (HEIGHT - 10);
      bar.setAttribute("x", String(bucket.day * barWidth));
      bar.setAttribute("y", String(HEIGHT - barHeight));
      bar.setAttribute("width", String(Math.max(barWidth - 2, 1)));
      bar.setAttribute("height", String(barHeight));
      bar.dataset.day = String(bucket.day);
      bar.dataset.events = String(bucket.events);
      svg.appendChild(bar);
    }
    this.element.appendChild(svg);
  }
}
