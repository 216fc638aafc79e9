/** Payload shapes of the annotation service API. */

export type SupportLabel = "FULL_SUPPORT" | "PARTIAL_SUPPORT" | "NO_SUPPORT";

export type HumanCondition = "FROM_SCRATCH" | "POST_EDITING";

export interface PairKey {
  topic_id: string;
  run_id: string;
  sentence_index: number;
  passage_id: string;
}

export interface SessionInfo {
  session_id: string;
  judge_id: string;
  condition: HumanCondition;
  topic_ids: string[];
  queue_length: number;
  created_at: string;
}

export interface AnnotationItem {
  done: false;
  pair: PairKey;
  sentence_text: string;
  passage_title: string;
  passage_text: string;
  topic_query: string;
  position: number;
  total: number;
  /** Present only when the server chose to disclose it (post-editing). */
  machine_label?: SupportLabel;
}

export interface SessionDone {
  done: true;
  total: number;
  label_counts: Partial<Record<SupportLabel, number>>;
}

export type NextResponse = AnnotationItem | SessionDone;

export interface SubmitAck {
  stored: Record<string, unknown>;
  seq: number;
  history_length: number;
}

export interface ApiErrorBody {
  error: { code: string; detail: string };
}
