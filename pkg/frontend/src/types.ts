/** Wire types for the sandbox service. Field names mirror the JSON exactly. */

export type EventKind = "message" | "reaction" | "reply" | "bot_post" | "config";

export type Frequency = "weekly" | "every_other_day" | "daily";

export type Sentiment = "positive" | "negative" | "neutral";

export interface MessagePayload {
  text: string;
}

export interface ReactionPayload {
  target_seq: number;
  emoji: string;
}

export interface ReplyPayload {
  parent_seq: number;
  text: string;
}

export interface SignalRecord {
  heuristic: string;
  category: "metadata" | "paper_connection" | "member_connection";
  score: number;
  payload: Record<string, unknown>;
  evidence_seqs: number[];
}

export interface ProvenanceRecord {
  metadata: SignalRecord | null;
  paper_connection: SignalRecord | null;
  member_connection: SignalRecord | null;
}

export interface BotPostPayload {
  body: string;
  paper_ref: string;
  metadata_block: {
    title: string;
    authors: string[];
    venue: string | null;
    year: number | null;
    url: string;
  };
  provenance: ProvenanceRecord;
  condition: string;
}

export interface FeedEvent {
  seq: number;
  ts: string;
  channel: string;
  kind: EventKind;
  actor: string;
  payload: Record<string, unknown>;
}

export interface FeedPage {
  channel: string;
  since: number;
  last_seq: number;
  events: FeedEvent[];
}

export interface MemberRecord {
  member_id: string;
  display_name: string;
  linked_author_id: string | null;
  affiliation: string | null;
}

export interface ChannelListing {
  channel: string;
  last_seq: number;
  members: MemberRecord[];
}

export interface ServiceListing {
  service: string;
  bot_actor: string;
  channels: ChannelListing[];
}

export interface ChannelConfigRecord {
  channel: string;
  frequency: Frequency;
  seed_window_days: number;
  heuristic_window_days: number;
  tau: number;
  char_limits: { metadata: number; prior_paper: number; member: number; synthesis: number };
  emoji_lexicon_overrides: Record<string, string>;
  mention_cooldown: number;
}

export interface CycleOutcome {
  channel: string;
  status: string;
  posted_seq: number | null;
  candidate: string | null;
  seeds: string[];
  detail: string;
}

export interface ReportRow {
  day: number;
  human_recs: number;
  bot_recs: number;
  emoji_reactions: number;
  comments: number;
}

export interface ReportResponse {
  channel: string;
  rows: ReportRow[];
}

export interface ServiceError {
  error: string;
  detail: string;
}
