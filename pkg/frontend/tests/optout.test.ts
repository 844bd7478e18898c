import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { OptOutDialog } from "../src/optout.js";
import { FakeService } from "./fake_service.js";

function setup() {
  const service = new FakeService();
  const api = new ApiClient("", service.fetch);
  const dialog = new OptOutDialog(api);
  document.body.replaceChildren(dialog.element);
  return { service, dialog };
}

const input = (dialog: OptOutDialog) =>
  dialog.element.querySelector("textarea")!;
const submit = (dialog: OptOutDialog) =>
  dialog.element.querySelector("button")!;

describe("opt-out dialog", () => {
  it("submit is disabled until a reason is entered", () => {
    const { dialog } = setup();
    expect(submit(dialog).disabled).toBe(true);

    input(dialog).value = "too many emails";
    input(dialog).dispatchEvent(new Event("input"));
    expect(submit(dialog).disabled).toBe(false);
  });

  it("whitespace-only reason keeps submit disabled with the inline prompt", () => {
    const { dialog } = setup();
    input(dialog).value = "   ";
    input(dialog).dispatchEvent(new Event("input"));
    expect(submit(dialog).disabled).toBe(true);
    const prompt = dialog.element.querySelector(
      ".inline-prompt",
    ) as HTMLElement;
    expect(prompt.style.display).not.toBe("none");
  });

  it("submit posts local_only with the reason", async () => {
    const { service, dialog } = setup();
    input(dialog).value = "prefer local";
    input(dialog).dispatchEvent(new Event("input"));
    const result = await dialog.submit();
    expect(result).toEqual({ mode: "local_only", reason: "prefer local" });
    expect(service.participation.mode).toBe("local_only");
    const request = service.requests.find((r) => r.path === "/v1/participation");
    expect(request?.body).toEqual({ mode: "local_only", reason: "prefer local" });
  });

  it("submit without a reason sends nothing", async () => {
    const { service, dialog } = setup();
    const result = await dialog.submit();
    expect(result).toBeNull();
    expect(service.requests).toHaveLength(0);
  });

  it("rejoin switches back to sharing", async () => {
    const { service, dialog } = setup();
    input(dialog).value = "testing";
    input(dialog).dispatchEvent(new Event("input"));
    await dialog.submit();
    const result = await dialog.rejoin();
    expect(result.mode).toBe("sharing");
    expect(service.participation.mode).toBe("sharing");
  });
});
