/** Read-only aggregator dashboard page: participant count, the active
 * privacy budget, and per-mode engagement totals. */

import { ApiClient } from "./api.js";
import type { DashboardStats } from "./types.js";

export class DashboardPage {
  readonly element: HTMLElement;

  constructor(private readonly api: ApiClient) {
    this.element = document.createElement("section");
    this.element.className = "dashboard";
    const heading = document.createElement("h2");
    heading.textContent = "Aggregator dashboard";
    this.element.appendChild(heading);
  }

  async refresh(): Promise<DashboardStats> {
    const stats = await this.api.getDashboardStats();
    this.render(stats);
    return stats;
  }

  private render(stats: DashboardStats): void {
    this.element.querySelector(".stats")?.remove();
    const container = document.createElement("div");
    container.className = "stats";

    const participants = document.createElement("p");
    participants.className = "participants";
    participants.textContent = `Participants: ${stats.participants}`;

    const epsilon = document.createElement("p");
    epsilon.className = "epsilon";
    epsilon.textContent = `Privacy budget ε = ${stats.epsilon}`;

    const table = document.createElement("table");
    table.className = "per-mode";
    const header = document.createElement("tr");
    for (const label of ["mode", "impressions", "clicks", "ctr"]) {
      const cell = document.createElement("th");
      cell.textContent = label;
      header.appendChild(cell);
    }
    table.appendChild(header);
    for (const [mode, row] of Object.entries(stats.per_mode).sort()) {
      const tr = document.createElement("tr");
      tr.dataset.mode = mode;
      const ctrText =
        row.ctr === null ? "—" : `${(row.ctr * 100).toFixed(2)}%`;
      for (const value of [mode, row.impressions, row.clicks, ctrText]) {
        const cell = document.createElement("td");
        cell.textContent = String(value);
        tr.appendChild(cell);
      }
      table.appendChild(tr);
    }

    container.append(participants, epsilon, table);
    this.element.appendChild(container);
  }
}
