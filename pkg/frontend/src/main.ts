/** Bootstrap: wire the controller to the DOM and keyboard. */

import { ReviewApi } from "./api.js";
import { ReviewController } from "./controller.js";
import type { SessionState } from "./controller.js";
import {
  renderOptions,
  renderProgress,
  renderSentence,
  renderUnsupportedVotes,
} from "./render.js";

function reviewerName(): string {
  const stored = window.localStorage.getItem("annotriage.reviewer");
  if (stored) return stored;
  const entered = window.prompt("Reviewer id:", "expert") || "expert";
  window.localStorage.setItem("annotriage.reviewer", entered);
  return entered;
}

function render(state: SessionState, controller: ReviewController): void {
  const root = document.getElementById("app");
  if (!root) return;
  root.textContent = "";

  const banner = document.getElementById("banner");
  if (banner) {
    banner.hidden = !(state.message && state.phase !== "error");
    if (state.message) banner.querySelector(".banner-text")!.textContent = state.message;
  }

  if (state.phase === "loading") {
    root.appendChild(paragraph("Loading queue..."));
    return;
  }
  if (state.phase === "error") {
    root.appendChild(paragraph(`Cannot reach the review API: ${state.message ?? "unknown"}`));
    const retry = button("Retry", () => void controller.refresh());
    retry.className = "primary";
    root.appendChild(retry);
    return;
  }
  if (state.phase === "done") {
    root.appendChild(heading("Queue complete"));
    root.appendChild(renderProgress(state));
    root.appendChild(
      paragraph("Every queued instance has an expert decision. Download the merged labels:"),
    );
    const link = document.createElement("a");
    link.href = controller.exportUrl();
    link.textContent = "Export labeled dataset";
    link.className = "export-link";
    root.appendChild(link);
    return;
  }

  const item = state.item!;
  root.appendChild(renderProgress(state));

  const meta = paragraph(
    `${item.instance_id} - ${item.pair_type} - reliability ${item.rel_index.toFixed(3)}`,
  );
  meta.className = "meta";
  root.appendChild(meta);

  root.appendChild(renderSentence(item));
  root.appendChild(renderOptions(item, state.selectedOption, (n) => controller.select(n)));
  const stray = renderUnsupportedVotes(item);
  if (stray) root.appendChild(stray);

  const submit = button("Submit decision", () => void controller.submit());
  submit.className = "primary";
  submit.disabled = state.selectedOption === null;
  root.appendChild(submit);

  const hint = paragraph("Keys 1-9 select an option; Enter submits.");
  hint.className = "hint";
  root.appendChild(hint);
}

function paragraph(text: string): HTMLParagraphElement {
  const node = document.createElement("p");
  node.textContent = text;
  return node;
}

function heading(text: string): HTMLHeadingElement {
  const node = document.createElement("h2");
  node.textContent = text;
  return node;
}

function button(text: string, onClick: () => void): HTMLButtonElement {
  const node = document.createElement("button");
  node.textContent = text;
  node.addEventListener("click", onClick);
  return node;
}

export function start(): void {
  const controller = new ReviewController(new ReviewApi(""), reviewerName());
  controller.subscribe((state) => render(state, controller));
  window.addEventListener("keydown", (event) => {
    if (event.key >= "1" && event.key <= "9") {
      controller.select(Number(event.key));
    } else if (event.key === "Enter") {
      void controller.submit();
    }
  });
  void controller.refresh();
}

start();
