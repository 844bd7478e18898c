/** Application shell: mounts the feed, settings, opt-out, activity, and
 * dashboard panels against the loopback client service. */

import { ActivityChart } from "./activity.js";
import { ApiClient } from "./api.js";
import { DashboardPage } from "./dashboard.js";
import { FeedView } from "./feed.js";
import { OptOutDialog } from "./optout.js";
import { SettingsPanel } from "./settings.js";

export interface App {
  feed: FeedView;
  settings: SettingsPanel;
  optOut: OptOutDialog;
  activity: ActivityChart;
  dashboard: DashboardPage;
}

export function mountApp(
  root: HTMLElement,
  clientApi: ApiClient,
  aggregatorApi: ApiClient,
): App {
  const feedRoot = document.createElement("main");
  feedRoot.id = "feed-root";

  const feed = new FeedView(clientApi, feedRoot);
  const settings = new SettingsPanel(clientApi);
  const optOut = new OptOutDialog(clientApi);
  const activity = new ActivityChart(clientApi);
  const dashboard = new DashboardPage(aggregatorApi);

  root.replaceChildren(
    feedRoot,
    settings.element,
    optOut.element,
    activity.element,
    dashboard.element,
  );
  return { feed, settings, optOut, activity, dashboard };
}

declare global {
  interface Window {
    FEDFLEX_AGGREGATOR_URL?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const root = document.getElementById("app") as HTMLElement;
  const clientApi = new ApiClient("");
  const aggregatorApi = new ApiClient(
    window.FEDFLEX_AGGREGATOR_URL ?? "http://127.0.0.1:8800",
  );
  const app = mountApp(root, clientApi, aggregatorApi);
  void app.feed.refresh();
  void app.activity.refresh();
  void app.dashboard.refresh().catch(() => {
    /* dashboard is optional when no aggregator is reachable */
  });
}
