/** Opt-out dialog: switching to local-only training requires a non-empty
 * reason before the submit button enables (mirrors the API precondition). */

import { ApiClient } from "./api.js";
import type { Participation } from "./types.js";

export class OptOutDialog {
  readonly element: HTMLElement;
  private readonly reasonInput: HTMLTextAreaElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly prompt: HTMLElement;
  private readonly status: HTMLElement;

  constructor(private readonly api: ApiClient) {
    this.element = document.createElement("section");
    this.element.className = "opt-out";

    const heading = document.createElement("h2");
    heading.textContent = "Stop sharing model updates";

    const blurb = document.createElement("p");
    blurb.textContent =
      "Your device keeps learning locally; nothing further is sent to the " +
      "aggregator. Telling us why helps improve the shared system.";

    this.reasonInput = document.createElement("textarea");
    this.reasonInput.placeholder = "Why are you opting out?";
    this.reasonInput.addEventListener("input", () => this.syncSubmitState());

    this.prompt = document.createElement("p");
    this.prompt.className = "inline-prompt";
    this.prompt.textContent = "A reason is required to opt out.";

    this.submitButton = document.createElement("button");
    this.submitButton.textContent = "Opt out";
    this.submitButton.disabled = true;
    this.submitButton.addEventListener("click", () => void this.submit());

    this.status = document.createElement("p");
    this.status.className = "status";

    this.element.append(
      heading,
      blurb,
      this.reasonInput,
      this.prompt,
      this.submitButton,
      this.status,
    );
  }

  get reason(): string {
    return this.reasonInput.value.trim();
  }

  private syncSubmitState(): void {
    const hasReason = this.reason.length > 0;
    this.submitButton.disabled = !hasReason;
    this.prompt.style.display = hasReason ? "none" : "";
  }

  async submit(): Promise<Participation | null> {
    if (this.reason.length === 0) return null;
    const result = await this.api.putParticipation("local_only", this.reason);
    this.status.textContent = `Participation mode: ${result.mode}`;
    return result;
  }

  async rejoin(): Promise<Participation> {
    const result = await this.api.putParticipation("sharing");
    this.status.textContent = `Participation mode: ${result.mode}`;
    return result;
  }
}
