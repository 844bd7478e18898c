/** Settings panel: theme choice (exercises settings_change events) and the
 * 1-5 satisfaction widget. Every write goes straight to the API. */

import { ApiClient } from "./api.js";

export class SettingsPanel {
  readonly element: HTMLElement;
  private readonly status: HTMLElement;

  constructor(private readonly api: ApiClient) {
    this.element = document.createElement("section");
    this.element.className = "settings";

    const heading = document.createElement("h2");
    heading.textContent = "Settings";

    const themeLabel = document.createElement("label");
    themeLabel.textContent = "Theme";
    const theme = document.createElement("select");
    theme.className = "theme-select";
    for (const value of ["light", "dark"]) {
      const option = document.createElement("option");
      option.value = value;
      option.textContent = value;
      theme.appendChild(option);
    }
    theme.addEventListener("change", () => void this.setTheme(theme.value));
    themeLabel.appendChild(theme);

    const satisfaction = document.createElement("div");
    satisfaction.className = "satisfaction";
    const satLabel = document.createElement("span");
    satLabel.textContent = "How satisfied are you with your recommendations?";
    satisfaction.appendChild(satLabel);
    for (let rating = 1; rating <= 5; rating++) {
      const star = document.createElement("button");
      star.textContent = String(rating);
      star.dataset.rating = String(rating);
      star.addEventListener("click", () => void this.rate(rating));
      satisfaction.appendChild(star);
    }

    this.status = document.createElement("p");
    this.status.className = "status";

    this.element.append(heading, themeLabel, satisfaction, this.status);
  }

  async setTheme(value: string): Promise<void> {
    await this.api.putSetting("theme", value);
    document.body.dataset.theme = value;
    this.status.textContent = `Theme set to ${value}.`;
  }

  /** Ratings are generated by the five fixed buttons, so only 1-5 can ever
   * be posted. */
  async rate(rating: number): Promise<void> {
    if (!Number.isInteger(rating) || rating < 1 || rating > 5) {
      throw new RangeError("satisfaction rating must be 1-5");
    }
    await this.api.postEvent({
      type: "satisfaction_rating",
      payload: String(rating),
    });
    this.status.textContent = `Thanks! You rated ${rating}/5.`;
  }
}
