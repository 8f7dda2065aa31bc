import type {
  ChannelConfigRecord,
  CycleOutcome,
  FeedEvent,
  FeedPage,
  ReportResponse,
  ServiceListing,
} from "./types.js";

/** Raised when the service answers with an error body. */
export class ApiError extends Error {
  readonly status: number;
  readonly kind: string;

  constructor(status: number, kind: string, detail: string) {
    super(detail || kind);
    this.status = status;
    this.kind = kind;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let kind = `HTTP ${response.status}`;
  let detail = "";
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    kind = body.error ?? kind;
    detail = body.detail ?? "";
  } catch {
    // non-JSON error body; keep the status text
    detail = response.statusText;
  }
  throw new ApiError(response.status, kind, detail);
}

/**
 * Thin typed client over the sandbox HTTP API. Paths are the contract;
 * nothing here reinterprets the payloads.
 */
export class SandboxClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  listing(): Promise<ServiceListing> {
    return this.get<ServiceListing>("/");
  }

  feed(channel: string, since = 0): Promise<FeedPage> {
    const qs = since > 0 ? `?since=${since}` : "";
    return this.get<FeedPage>(`/channels/${encodeURIComponent(channel)}/feed${qs}`);
  }

  postMessage(channel: string, actor: string, text: string): Promise<FeedEvent> {
    return this.post<FeedEvent>(`/channels/${encodeURIComponent(channel)}/messages`, {
      actor,
      text,
    });
  }

  postReaction(
    channel: string,
    targetSeq: number,
    actor: string,
    emoji: string,
  ): Promise<FeedEvent> {
    return this.post<FeedEvent>(
      `/channels/${encodeURIComponent(channel)}/messages/${targetSeq}/reactions`,
      { actor, emoji },
    );
  }

  postReply(channel: string, parentSeq: number, actor: string, text: string): Promise<FeedEvent> {
    return this.post<FeedEvent>(
      `/channels/${encodeURIComponent(channel)}/messages/${parentSeq}/replies`,
      { actor, text },
    );
  }

  getConfig(channel: string): Promise<ChannelConfigRecord> {
    return this.get<ChannelConfigRecord>(`/channels/${encodeURIComponent(channel)}/config`);
  }

  putConfig(channel: string, changes: Record<string, unknown>): Promise<ChannelConfigRecord> {
    return this.request<ChannelConfigRecord>(
      "PUT",
      `/channels/${encodeURIComponent(channel)}/config`,
      changes,
    );
  }

  runCycle(channel: string): Promise<CycleOutcome> {
    return this.post<CycleOutcome>(`/channels/${encodeURIComponent(channel)}/cycle`);
  }

  report(channel: string): Promise<ReportResponse> {
    return this.get<ReportResponse>(
      `/channels/${encodeURIComponent(channel)}/report?format=json`,
    );
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>("GET", path);
  }

  private post<T>(path: string, body?: Record<string, unknown>): Promise<T> {
    return this.request<T>("POST", path, body);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: Record<string, unknown>,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.base + path, init);
    return unwrap<T>(response);
  }
}
