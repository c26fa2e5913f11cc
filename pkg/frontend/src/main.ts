// Browser entry: wires the controller to the DOM. The page is served by the
// engine itself under /console, so all API paths are same-origin.

import { ConsoleApi } from "./api.js";
import { ConsoleController } from "./controller.js";
import {
  renderAnswerControls,
  renderClaimDetail,
  renderError,
  renderQueue,
  renderVerifyBanner,
} from "./render.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node;
}

const api = new ConsoleApi("");
const controller = new ConsoleController(api, {
  confirmPrivilege: (message) => window.confirm(message),
  onChange: (state) => {
    el("banner").innerHTML = state.verify
      ? renderVerifyBanner(state.verify, state.reverifyNote ?? undefined)
      : "";
    el("queue").innerHTML = renderQueue(
      state.queue,
      state.detail?.claim.claim_id,
    );
    el("detail").innerHTML = state.detail ? renderClaimDetail(state.detail) : "";
    const openItem = state.detail
      ? state.queue.find((i) => i.claim_id === state.detail!.claim.claim_id)
      : undefined;
    el("controls").innerHTML = openItem ? renderAnswerControls(openItem) : "";
    el("error").innerHTML = state.error ? renderError(state.error) : "";
  },
});

el("queue").addEventListener("click", (event) => {
  const row = (event.target as HTMLElement).closest<HTMLElement>("tr[data-claim]");
  if (row?.dataset.claim) {
    void controller.select(row.dataset.claim);
  }
});

el("controls").addEventListener("click", (event) => {
  const button = (event.target as HTMLElement).closest<HTMLButtonElement>("button[data-answer]");
  const holder = button?.closest<HTMLElement>("[data-item]");
  if (!button || !holder?.dataset.item) {
    return;
  }
  const kind = button.dataset.answer;
  const body =
    kind === "select"
      ? { type: "candidate_select" as const, value: button.dataset.value ?? "" }
      : { type: "binary" as const, value: kind === "confirm" ? "confirm" : "reject" };
  void controller.submitAnswer(holder.dataset.item, body);
});

el("verify-btn").addEventListener("click", () => void controller.startVerify());

el("detail").addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const section = target.closest<HTMLElement>("[data-claim]");
  if (!section?.dataset.claim) {
    return;
  }
  if (target.matches("button[data-op='lock']")) {
    void controller.lockClaim(section.dataset.claim);
  }
  if (target.matches("button[data-op='override']")) {
    const value = window.prompt("Override value:");
    if (value !== null && value !== "") {
      void controller.overrideClaim(section.dataset.claim, value);
    }
  }
});

controller.startPolling();
