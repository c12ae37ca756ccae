// @vitest-environment jsdom
/** Rendered-DOM checks: cards mirror the server, mutations go through
 * clicks, and the done screen reports the final count.
 */

import { afterEach, beforeEach, expect, it, vi } from "vitest";

import { LabelApp } from "../src/app.js";
import { MockServer } from "./mock_server.js";

let server: MockServer;
let root: HTMLElement;

beforeEach(() => {
  server = new MockServer(6);
  vi.stubGlobal("fetch", server.fetch);
  root = document.createElement("div");
  document.body.append(root);
});

afterEach(() => {
  root.remove();
  vi.unstubAllGlobals();
});

function click(el: Element | null) {
  el?.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

it("renders one card per cluster and tracks label state", async () => {
  const app = new LabelApp(root);
  await app.refresh();
  expect(root.querySelectorAll(".card")).toHaveLength(6);
  expect(root.querySelectorAll(".card.unlabeled")).toHaveLength(6);

  const input = root.querySelector<HTMLInputElement>("#label-input-2");
  expect(input).not.toBeNull();
  input!.value = "rust";
  click(root.querySelector('[data-cluster="2"] [data-action="apply"]'));
  await vi.waitFor(() => {
    expect(root.querySelectorAll(".card.labeled")).toHaveLength(1);
  });
  expect(root.querySelector('[data-cluster="2"] .label')?.textContent).toBe("rust");
  expect(root.querySelector("progress")?.getAttribute("value")).toBe("1");
});

it("highlights the cluster a premature finalize names", async () => {
  const app = new LabelApp(root);
  await app.refresh();
  for (let i = 0; i < 5; i++) {
    await app.assign(i, "rust");
  }
  click(root.querySelector('[data-action="finalize"]'));
  await vi.waitFor(() => {
    expect(root.querySelectorAll(".card.flagged")).toHaveLength(1);
  });
  expect(root.querySelector(".card.flagged")?.getAttribute("data-cluster")).toBe("5");
  expect(root.querySelector(".banner")?.textContent).toContain("1 cluster(s) still unlabeled");
});

it("shows the done screen with the labeled count", async () => {
  const app = new LabelApp(root);
  await app.refresh();
  for (let i = 0; i < 6; i++) {
    await app.assign(i, `genus-${i % 2}`);
  }
  await app.finalizeAll();
  expect(root.querySelector(".done")).not.toBeNull();
  expect(root.textContent).toContain(String(server.retained));
  expect(root.textContent).toContain("labeled_dataset.json".replace(".json", ""));
});
