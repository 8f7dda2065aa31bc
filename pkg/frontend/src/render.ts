import { tokenize } from "./markup.js";
import type { FeedStore, Card } from "./store.js";
import type { BotPostPayload, FeedEvent, SignalRecord } from "./types.js";

const LOOP_URL = /^loop:\/\/([^/]+)\/(\d+)$/;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/**
 * Render a message body to DOM. Every markup token becomes exactly one
 * element: bold runs a <strong>, mentions a .mention span, links an anchor.
 * `loop://channel/seq` links point at the in-feed card they cite.
 */
export function renderMarkup(body: string, store: FeedStore): DocumentFragment {
  const fragment = document.createDocumentFragment();
  let bold: HTMLElement | null = null;
  const sink = (wantBold: boolean): Node => {
    if (!wantBold) {
      bold = null;
      return fragment;
    }
    if (!bold) {
      bold = el("strong");
      fragment.appendChild(bold);
    }
    return bold;
  };
  for (const token of tokenize(body)) {
    const parent = sink(token.bold);
    if (token.kind === "text") {
      parent.appendChild(document.createTextNode(token.text));
    } else if (token.kind === "mention") {
      const span = el("span", "mention", "@" + store.memberName(token.memberId));
      span.dataset["memberId"] = token.memberId;
      parent.appendChild(span);
    } else {
      const anchor = el("a", "", token.title);
      const loop = LOOP_URL.exec(token.url);
      if (loop) {
        anchor.className = "thread-link";
        anchor.href = `#msg-${loop[2]}`;
        anchor.dataset["targetSeq"] = loop[2]!;
      } else {
        anchor.className = "ext-link";
        anchor.href = token.url;
        anchor.target = "_blank";
        anchor.rel = "noreferrer";
      }
      parent.appendChild(anchor);
    }
  }
  return fragment;
}

function signalLine(slot: string, signal: SignalRecord): HTMLElement {
  const item = el("li", "provenance-signal");
  item.dataset["heuristic"] = signal.heuristic;
  item.dataset["category"] = signal.category;
  item.appendChild(el("span", "heuristic-id", signal.heuristic));
  item.appendChild(
    el("span", "signal-slot", ` ${slot.replace("_", " ")} · score ${signal.score.toFixed(2)}`),
  );
  if (signal.evidence_seqs.length) {
    const links = el("span", "evidence");
    links.append(" — evidence: ");
    signal.evidence_seqs.forEach((seq, i) => {
      if (i) links.append(", ");
      const a = el("a", "evidence-link", `#${seq}`);
      a.href = `#msg-${seq}`;
      links.appendChild(a);
    });
    item.appendChild(links);
  }
  return item;
}

/** "Why this paper": the fired signals, straight from the stored payload. */
export function renderProvenance(payload: BotPostPayload): HTMLElement {
  const wrap = el("div", "provenance");
  const button = el("button", "provenance-toggle", "why this paper");
  button.type = "button";
  const popover = el("div", "provenance-popover");
  popover.hidden = true;
  const list = el("ul", "provenance-list");
  const slots: [string, SignalRecord | null][] = [
    ["metadata", payload.provenance.metadata],
    ["paper_connection", payload.provenance.paper_connection],
    ["member_connection", payload.provenance.member_connection],
  ];
  let fired = 0;
  for (const [slot, signal] of slots) {
    if (signal) {
      list.appendChild(signalLine(slot, signal));
      fired += 1;
    }
  }
  if (!fired) list.appendChild(el("li", "provenance-empty", "no social signals fired"));
  popover.appendChild(list);
  button.addEventListener("click", () => {
    popover.hidden = !popover.hidden;
  });
  wrap.append(button, popover);
  return wrap;
}

function renderMetadataBlock(payload: BotPostPayload): HTMLElement {
  const block = el("div", "paper-meta");
  const title = el("a", "paper-title", payload.metadata_block.title);
  title.href = payload.metadata_block.url;
  title.target = "_blank";
  title.rel = "noreferrer";
  block.appendChild(title);
  const bits: string[] = [payload.metadata_block.authors.join(", ")];
  if (payload.metadata_block.venue) bits.push(payload.metadata_block.venue);
  if (payload.metadata_block.year) bits.push(String(payload.metadata_block.year));
  block.appendChild(el("div", "paper-byline", bits.filter(Boolean).join(" · ")));
  return block;
}

function renderChips(card: Card): HTMLElement {
  const row = el("div", "chips");
  for (const [emoji, count] of card.chips) {
    const chip = el("span", "chip", `:${emoji}: ${count}`);
    chip.dataset["emoji"] = emoji;
    chip.dataset["count"] = String(count);
    row.appendChild(chip);
  }
  return row;
}

function renderReplies(card: Card, store: FeedStore): HTMLElement {
  const pane = el("div", "thread-pane");
  for (const reply of card.replies) {
    const item = el("div", "thread-reply");
    item.dataset["seq"] = String(reply.seq);
    item.appendChild(el("span", "author", store.memberName(reply.actor)));
    item.appendChild(el("span", "text", " " + String(reply.payload["text"])));
    pane.appendChild(item);
  }
  return pane;
}

export function renderCard(card: Card, store: FeedStore): HTMLElement {
  const { event } = card;
  const isBot = event.kind === "bot_post";
  const article = el("article", isBot ? "card bot-card" : "card");
  article.id = `msg-${event.seq}`;
  article.dataset["seq"] = String(event.seq);
  article.dataset["kind"] = event.kind;

  const header = el("header", "card-header");
  header.appendChild(
    el("span", "author", isBot ? event.actor : store.memberName(event.actor)),
  );
  header.appendChild(el("time", "ts", new Date(event.ts).toISOString()));
  article.appendChild(header);

  const body = el("div", "card-body");
  if (isBot) {
    const payload = store.botPayload(event);
    body.appendChild(renderMarkup(payload.body, store));
    article.appendChild(body);
    article.appendChild(renderMetadataBlock(payload));
    article.appendChild(renderProvenance(payload));
  } else {
    body.appendChild(renderMarkup(String(event.payload["text"] ?? ""), store));
    article.appendChild(body);
  }

  article.appendChild(renderChips(card));
  if (card.replies.length) article.appendChild(renderReplies(card, store));
  return article;
}

export function renderFeed(store: FeedStore, container: HTMLElement): void {
  container.replaceChildren();
  for (const card of store.cards()) {
    container.appendChild(renderCard(card, store));
  }
}

export function showToast(container: HTMLElement, text: string): void {
  const toast = el("div", "toast", text);
  container.appendChild(toast);
  setTimeout(() => toast.remove(), 4000);
}
