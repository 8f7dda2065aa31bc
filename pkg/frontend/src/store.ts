import type { SandboxClient } from "./api.js";
import { ApiError } from "./api.js";
import type {
  BotPostPayload,
  ChannelConfigRecord,
  CycleOutcome,
  FeedEvent,
  MemberRecord,
  ReportRow,
} from "./types.js";

export interface Card {
  event: FeedEvent;
  /** reaction name -> count, insertion-ordered by first reaction */
  chips: Map<string, number>;
  replies: FeedEvent[];
}

type Listener = () => void;

/**
 * Client-side view of one channel. Holds no authoritative state: everything
 * here is reconstructed from `GET /feed` and can be thrown away at any time.
 * Writes go through the service and the returned event is inserted
 * immediately; the next poll is a no-op for it (dedup by seq).
 */
export class FeedStore {
  readonly channel: string;
  private readonly client: SandboxClient;
  private events = new Map<number, FeedEvent>();
  private members = new Map<string, MemberRecord>();
  private botActor = "paperbot";
  private config: ChannelConfigRecord | null = null;
  private report: ReportRow[] = [];
  private lastSeq = 0;
  private listeners = new Set<Listener>();
  lastError: string | null = null;

  constructor(client: SandboxClient, channel: string) {
    this.client = client;
    this.channel = channel;
  }

  onChange(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  /** Full bootstrap: roster, config, feed, report. */
  async load(): Promise<void> {
    const listing = await this.client.listing();
    this.botActor = listing.bot_actor;
    const entry = listing.channels.find((c) => c.channel === this.channel);
    if (!entry) throw new Error(`service does not host channel '${this.channel}'`);
    this.members = new Map(entry.members.map((m) => [m.member_id, m]));
    this.config = await this.client.getConfig(this.channel);
    await this.sync();
    await this.refreshReport();
  }

  /** One poll step: fetch events after the last seen seq. */
  async sync(): Promise<number> {
    const page = await this.client.feed(this.channel, this.lastSeq);
    for (const event of page.events) this.insert(event);
    this.emit();
    return page.events.length;
  }

  async refreshReport(): Promise<void> {
    const res = await this.client.report(this.channel);
    this.report = res.rows;
    this.emit();
  }

  private insert(event: FeedEvent): void {
    if (!this.events.has(event.seq)) {
      this.events.set(event.seq, event);
      if (event.seq > this.lastSeq) this.lastSeq = event.seq;
    }
  }

  // --- mutations -----------------------------------------------------------

  async postMessage(actor: string, text: string): Promise<FeedEvent> {
    if (!text.trim()) {
      throw new Error("message text must be non-empty");
    }
    const event = await this.run(() => this.client.postMessage(this.channel, actor, text));
    this.insert(event);
    this.emit();
    return event;
  }

  async postReaction(targetSeq: number, actor: string, emoji: string): Promise<FeedEvent> {
    const event = await this.run(() =>
      this.client.postReaction(this.channel, targetSeq, actor, emoji),
    );
    this.insert(event);
    this.emit();
    return event;
  }

  async postReply(parentSeq: number, actor: string, text: string): Promise<FeedEvent> {
    if (!text.trim()) {
      throw new Error("reply text must be non-empty");
    }
    const event = await this.run(() => this.client.postReply(this.channel, parentSeq, actor, text));
    this.insert(event);
    this.emit();
    return event;
  }

  async updateConfig(changes: Record<string, unknown>): Promise<ChannelConfigRecord> {
    const config = await this.run(() => this.client.putConfig(this.channel, changes));
    this.config = config;
    await this.sync(); // the service appends a config event
    return config;
  }

  async runCycle(): Promise<CycleOutcome> {
    const outcome = await this.run(() => this.client.runCycle(this.channel));
    await this.sync();
    await this.refreshReport();
    return outcome;
  }

  private async run<T>(action: () => Promise<T>): Promise<T> {
    try {
      const result = await action();
      this.lastError = null;
      return result;
    } catch (error) {
      this.lastError =
        error instanceof ApiError ? `${error.kind}: ${error.message}` : String(error);
      this.emit();
      throw error;
    }
  }

  // --- views ---------------------------------------------------------------

  /** Top-level cards (messages and bot posts) in seq order, with chips and threads. */
  cards(): Card[] {
    const ordered = [...this.events.values()].sort((a, b) => a.seq - b.seq);
    const bySeq = new Map<number, Card>();
    const cards: Card[] = [];
    for (const event of ordered) {
      if (event.kind === "message" || event.kind === "bot_post") {
        const card: Card = { event, chips: new Map(), replies: [] };
        bySeq.set(event.seq, card);
        cards.push(card);
      }
    }
    for (const event of ordered) {
      if (event.kind === "reaction") {
        const target = bySeq.get(Number(event.payload["target_seq"]));
        if (target) {
          const emoji = String(event.payload["emoji"]);
          target.chips.set(emoji, (target.chips.get(emoji) ?? 0) + 1);
        }
      } else if (event.kind === "reply") {
        bySeq.get(Number(event.payload["parent_seq"]))?.replies.push(event);
      }
    }
    return cards;
  }

  allEvents(): FeedEvent[] {
    return [...this.events.values()].sort((a, b) => a.seq - b.seq);
  }

  /** Stable serialization of the reconstructed feed, for equality checks. */
  snapshot(): string {
    return JSON.stringify(this.allEvents());
  }

  memberName(memberId: string): string {
    return this.members.get(memberId)?.display_name ?? memberId;
  }

  roster(): MemberRecord[] {
    return [...this.members.values()];
  }

  isBot(actor: string): boolean {
    return actor === this.botActor;
  }

  currentConfig(): ChannelConfigRecord | null {
    return this.config;
  }

  reportRows(): ReportRow[] {
    return this.report;
  }

  lastBotPostTs(): string | null {
    let latest: FeedEvent | null = null;
    for (const event of this.events.values()) {
      if (event.kind === "bot_post" && (!latest || event.seq > latest.seq)) latest = event;
    }
    return latest?.ts ?? null;
  }

  botPayload(event: FeedEvent): BotPostPayload {
    return event.payload as unknown as BotPostPayload;
  }
}
