/** Wire types mirroring the review API payloads. */

export interface ParsedOutcome {
  kind: "label" | "blank" | "hallucination";
  label?: string;
  text?: string;
  style?: string | null;
}

export interface VoteEntry {
  annotator: string;
  outcome: ParsedOutcome;
}

export interface ExpertDecision {
  label: string;
  reviewer: string;
  timestamp: string;
}

export interface ReviewItem {
  instance_id: string;
  marked_sentence: string;
  pair_type: string;
  /** Canonical schema order, never the shuffled prompt order. */
  options: string[];
  option_texts: string[];
  votes: VoteEntry[];
  confid: Record<string, number>;
  rel_index: number;
  selected: string;
  decision: ExpertDecision | null;
}

export interface Progress {
  total: number;
  reviewed: number;
  auto_accepted: number;
  mean_rel_index_remaining: number | null;
}

export interface DecisionResult {
  remaining: number;
  superseded: boolean;
}
