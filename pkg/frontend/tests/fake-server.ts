/** In-memory stand-in for the review API, used by the controller tests.
 *
 * Mirrors the server contract: queue ordered by ascending reliability,
 * decisions recorded last-write-wins, progress counts, merged export.
 */

import type { FetchLike } from "../src/api.js";
import type { ReviewItem } from "../src/types.js";

export interface FakeServerOptions {
  failSubmissions?: number; // fail this many POSTs with a 503 first
  failQueueFetches?: number;
}

export class FakeServer {
  decisions = new Map<string, { label: string; reviewer: string }>();
  posts: Array<Record<string, unknown>> = [];
  private failSubmissions: number;
  private failQueueFetches: number;

  constructor(
    private items: ReviewItem[],
    public autoAccepted = 0,
    options: FakeServerOptions = {},
  ) {
    this.failSubmissions = options.failSubmissions ?? 0;
    this.failQueueFetches = options.failQueueFetches ?? 0;
  }

  pending(): ReviewItem[] {
    return this.items
      .filter((item) => !this.decisions.has(item.instance_id))
      .sort((a, b) => a.rel_index - b.rel_index || a.instance_id.localeCompare(b.instance_id));
  }

  fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://fake.test");
    if (url.pathname === "/api/queue") {
      if (this.failQueueFetches > 0) {
        this.failQueueFetches -= 1;
        return json(503, { detail: "temporarily unavailable" });
      }
      const limit = Number(url.searchParams.get("limit") ?? "10");
      return json(200, this.pending().slice(0, limit));
    }
    if (url.pathname === "/api/progress") {
      const pending = this.pending();
      return json(200, {
        total: this.items.length,
        reviewed: this.items.length - pending.length,
        auto_accepted: this.autoAccepted,
        mean_rel_index_remaining: pending.length
          ? pending.reduce((sum, item) => sum + item.rel_index, 0) / pending.length
          : null,
      });
    }
    if (url.pathname === "/api/decision" && init?.method === "POST") {
      const body = JSON.parse(String(init.body)) as {
        instance_id: string;
        label: string;
        reviewer: string;
      };
      this.posts.push(body);
      if (this.failSubmissions > 0) {
        this.failSubmissions -= 1;
        return json(503, { detail: "write failed" });
      }
      const item = this.items.find((candidate) => candidate.instance_id === body.instance_id);
      if (!item) return json(404, { detail: `unknown instance ${body.instance_id}` });
      if (!item.options.includes(body.label)) {
        return json(422, { detail: `label ${body.label} not an option` });
      }
      const superseded = this.decisions.has(body.instance_id);
      this.decisions.set(body.instance_id, { label: body.label, reviewer: body.reviewer });
      return json(200, { remaining: this.pending().length, superseded });
    }
    return json(404, { detail: "no such route" });
  };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

let counter = 0;

export function makeItem(overrides: Partial<ReviewItem> = {}): ReviewItem {
  counter += 1;
  const id = overrides.instance_id ?? `inst-${String(counter).padStart(3, "0")}`;
  return {
    instance_id: id,
    marked_sentence: `The predecessor **Acme ${counter}** filed on __May ${counter}, 1990__.`,
    pair_type: "ORG-DATE",
    options: ["formed_on", "acquired_on", "no_other"],
    option_texts: [
      `Acme ${counter} is/was formed on May ${counter}, 1990`,
      `Acme ${counter} is/was acquired on May ${counter}, 1990`,
      `no/other relation between Acme ${counter} and May ${counter}, 1990`,
    ],
    votes: [
      { annotator: "m/simple/t0.2/r1", outcome: { kind: "label", label: "formed_on" } },
      { annotator: "m/full_instruction/t0.2/r1", outcome: { kind: "label", label: "no_other" } },
      { annotator: "m/five_shot/t0.2/r1", outcome: { kind: "blank" } },
    ],
    confid: { formed_on: 1 / 3, acquired_on: 0, no_other: 1 / 3 },
    rel_index: 1 / 3,
    selected: "formed_on",
    decision: null,
    ...overrides,
  };
}

export function resetItemCounter(): void {
  counter = 0;
}
