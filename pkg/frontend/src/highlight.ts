/** Split an entity-marked sentence into renderable segments.
 *
 * The server marks entity1 as `**...**` and entity2 as `__...__`; the UI
 * renders them with distinct styles and never re-derives spans itself.
 */

export type SegmentKind = "plain" | "entity1" | "entity2";

export interface Segment {
  text: string;
  kind: SegmentKind;
}

const MARKER = /\*\*(.+?)\*\*|__(.+?)__/g;

export function parseMarkedSentence(marked: string): Segment[] {
  const segments: Segment[] = [];
  let cursor = 0;
  for (const match of marked.matchAll(MARKER)) {
    const index = match.index ?? 0;
    if (index > cursor) {
      segments.push({ text: marked.slice(cursor, index), kind: "plain" });
    }
    if (match[1] !== undefined) {
      segments.push({ text: match[1], kind: "entity1" });
    } else {
      segments.push({ text: match[2]!, kind: "entity2" });
    }
    cursor = index + match[0].length;
  }
  if (cursor < marked.length) {
    segments.push({ text: marked.slice(cursor), kind: "plain" });
  }
  return segments;
}

/** Recover the unmarked sentence (used by tests to sanity-check parsing). */
export function plainText(segments: Segment[]): string {
  return segments.map((segment) => segment.text).join("");
}
