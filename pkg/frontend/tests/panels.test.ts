import { describe, expect, it } from "vitest";

import { ActivityChart } from "../src/activity.js";
import { ApiClient } from "../src/api.js";
import { DashboardPage } from "../src/dashboard.js";
import { mountApp } from "../src/app.js";
import { FakeService } from "./fake_service.js";

function api(service: FakeService) {
  return new ApiClient("", service.fetch);
}

describe("activity chart", () => {
  it("plots one bar per daily bucket with the API's counts", async () => {
    const service = new FakeService();
    service.activity = [
      { day: 0, events: 12 },
      { day: 1, events: 3 },
      { day: 3, events: 7 },
    ];
    const chart = new ActivityChart(api(service));
    await chart.refresh();
    const bars = [...chart.element.querySelectorAll("svg rect")] as SVGRectElement[];
    expect(bars.map((b) => b.dataset.day)).toEqual(["0", "1", "3"]);
    expect(bars.map((b) => b.dataset.events)).toEqual(["12", "3", "7"]);
    const heights = bars.map((b) => Number(b.getAttribute("height")));
    expect(heights[0]).toBeGreaterThan(heights[1]);
  });

  it("shows an empty state with no activity", async () => {
    const service = new FakeService();
    const chart = new ActivityChart(api(service));
    await chart.refresh();
    expect(chart.element.querySelector("svg")).toBeNull();
    expect(chart.element.querySelector(".empty-state")).not.toBeNull();
  });
});

describe("dashboard page", () => {
  it("shows the active privacy budget from dp_meta", async () => {
    const service = new FakeService();
    const page = new DashboardPage(api(service));
    await page.refresh();
    expect(page.element.querySelector(".epsilon")?.textContent).toBe(
      "Privacy budget ε = 2",
    );
  });

  it("renders per-mode CTR rows", async () => {
    const service = new FakeService();
    const page = new DashboardPage(api(service));
    await page.refresh();
    const pers = page.element.querySelector('tr[data-mode="personalized"]');
    const div = page.element.querySelector('tr[data-mode="diversity"]');
    expect(pers?.textContent).toContain("23.33%");
    expect(div?.textContent).toContain("19.65%");
    expect(
      page.element.querySelector(".participants")?.textContent,
    ).toContain("22");
  });
});

describe("app shell", () => {
  it("mounts all five panels", () => {
    const service = new FakeService();
    const root = document.createElement("div");
    mountApp(root, api(service), api(service));
    expect(root.querySelector("#feed-root")).not.toBeNull();
    expect(root.querySelector(".settings")).not.toBeNull();
    expect(root.querySelector(".opt-out")).not.toBeNull();
    expect(root.querySelector(".activity")).not.toBeNull();
    expect(root.querySelector(".dashboard")).not.toBeNull();
  });
});
