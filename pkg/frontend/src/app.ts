import { SandboxClient } from "./api.js";
import { renderEngagementChart } from "./chart.js";
import { pickerEntries } from "./lexicon.js";
import { renderFeed, showToast } from "./render.js";
import { describeDue, nextPostDue } from "./schedule.js";
import { FeedStore } from "./store.js";
import type { Frequency } from "./types.js";

export interface AppOptions {
  baseUrl: string;
  channel: string;
  root: HTMLElement;
  pollMs?: number;
  fetchFn?: (input: string, init?: RequestInit) => Promise<Response>;
}

/**
 * The sandbox client application. All state lives in the FeedStore (and
 * therefore in the service); this class only wires DOM to store calls.
 */
export class SandboxApp {
  readonly store: FeedStore;
  private readonly root: HTMLElement;
  private readonly pollMs: number;
  private actor = "";
  private replyTo: number | null = null;
  private pickerFor: number | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  private feedBox!: HTMLElement;
  private toasts!: HTMLElement;
  private composerInput!: HTMLTextAreaElement;
  private composerLabel!: HTMLElement;
  private actorSelect!: HTMLSelectElement;
  private frequencySelect!: HTMLSelectElement;
  private dueLabel!: HTMLElement;
  private chartBox!: HTMLElement;
  private picker!: HTMLElement;

  constructor(options: AppOptions) {
    const client = new SandboxClient(options.baseUrl, options.fetchFn);
    this.store = new FeedStore(client, options.channel);
    this.root = options.root;
    this.pollMs = options.pollMs ?? 2000;
  }

  async start(): Promise<void> {
    this.buildSkeleton();
    await this.store.load();
    this.fillRoster();
    this.fillConfigPanel();
    this.store.onChange(() => this.render());
    this.render();
    if (this.pollMs > 0) {
      this.timer = setInterval(() => {
        void this.store.sync().catch(() => undefined);
      }, this.pollMs);
    }
  }

  stop(): void {
    if (this.timer) clearInterval(this.timer);
    this.timer = null;
  }

  // --- skeleton --------------------------------------------------------------

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <div class="sandbox">
        <header class="topbar">
          <span class="channel-name">#${this.store.channel}</span>
          <label>acting as <select class="actor-select"></select></label>
          <span class="next-post"></span>
          <button type="button" class="cycle-button">run cycle</button>
        </header>
        <div class="toasts"></div>
        <main class="feed"></main>
        <aside class="side">
          <section class="config-panel">
            <label>frequency
              <select class="frequency-select">
                <option value="weekly">weekly</option>
                <option value="every_other_day">every other day</option>
                <option value="daily">daily</option>
              </select>
            </label>
            <button type="button" class="config-apply">apply</button>
          </section>
          <section class="chart-panel"></section>
        </aside>
        <footer class="composer">
          <span class="composer-label"></span>
          <textarea class="composer-input" rows="2" placeholder="share a paper link…"></textarea>
          <button type="button" class="composer-send">post</button>
        </footer>
        <div class="emoji-picker" hidden></div>
      </div>`;
    const q = <T extends Element>(sel: string): T => {
      const node = this.root.querySelector<T>(sel);
      if (!node) throw new Error(`missing ${sel}`);
      return node;
    };
    this.feedBox = q<HTMLElement>(".feed");
    this.toasts = q<HTMLElement>(".toasts");
    this.composerInput = q<HTMLTextAreaElement>(".composer-input");
    this.composerLabel = q<HTMLElement>(".composer-label");
    this.actorSelect = q<HTMLSelectElement>(".actor-select");
    this.frequencySelect = q<HTMLSelectElement>(".frequency-select");
    this.dueLabel = q<HTMLElement>(".next-post");
    this.chartBox = q<HTMLElement>(".chart-panel");
    this.picker = q<HTMLElement>(".emoji-picker");

    q<HTMLButtonElement>(".composer-send").addEventListener("click", () => {
      void this.submitComposer();
    });
    q<HTMLButtonElement>(".cycle-button").addEventListener("click", () => {
      void this.triggerCycle();
    });
    q<HTMLButtonElement>(".config-apply").addEventListener("click", () => {
      void this.applyFrequency();
    });
  }

  private fillRoster(): void {
    this.actorSelect.replaceChildren();
    for (const member of this.store.roster()) {
      const option = document.createElement("option");
      option.value = member.member_id;
      option.textContent = member.display_name;
      this.actorSelect.appendChild(option);
    }
    const first = this.store.roster()[0];
    if (first) this.actor = first.member_id;
    this.actorSelect.addEventListener("change", () => {
      this.actor = this.actorSelect.value;
    });
  }

  private fillConfigPanel(): void {
    const config = this.store.currentConfig();
    if (config) this.frequencySelect.value = config.frequency;
  }

  // --- actions ---------------------------------------------------------------

  actAs(memberId: string): void {
    this.actor = memberId;
    this.actorSelect.value = memberId;
  }

  async submitComposer(): Promise<void> {
    const text = this.composerInput.value;
    if (!text.trim()) {
      showToast(this.toasts, "nothing to post: write a message first");
      return; // client-side rejection; the service never sees it
    }
    try {
      if (this.replyTo !== null) {
        await this.store.postReply(this.replyTo, this.actor, text);
        this.replyTo = null;
      } else {
        await this.store.postMessage(this.actor, text);
      }
      this.composerInput.value = "";
    } catch {
      showToast(this.toasts, this.store.lastError ?? "post failed");
    }
  }

  async react(targetSeq: number, emoji: string): Promise<void> {
    try {
      await this.store.postReaction(targetSeq, this.actor, emoji);
    } catch {
      showToast(this.toasts, this.store.lastError ?? "reaction failed");
    }
  }

  async triggerCycle(): Promise<void> {
    try {
      const outcome = await this.store.runCycle();
      const note =
        outcome.status === "posted"
          ? `cycle posted ${outcome.candidate ?? ""} (seq ${outcome.posted_seq})`
          : `cycle ${outcome.status}${outcome.detail ? `: ${outcome.detail}` : ""}`;
      showToast(this.toasts, note);
    } catch {
      showToast(this.toasts, this.store.lastError ?? "cycle failed");
    }
  }

  async applyFrequency(): Promise<void> {
    const frequency = this.frequencySelect.value as Frequency;
    try {
      await this.store.updateConfig({ frequency });
      showToast(this.toasts, `frequency set to ${frequency}`);
    } catch {
      showToast(this.toasts, this.store.lastError ?? "config update failed");
    }
  }

  startReply(parentSeq: number): void {
    this.replyTo = parentSeq;
    this.composerLabel.textContent = `replying to #${parentSeq}`;
    this.composerInput.focus();
  }

  openPicker(targetSeq: number): void {
    this.pickerFor = targetSeq;
    this.picker.replaceChildren();
    const overrides = this.store.currentConfig()?.emoji_lexicon_overrides;
    for (const entry of pickerEntries(overrides)) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = `picker-emoji sentiment-${entry.sentiment}`;
      button.dataset["emoji"] = entry.emoji;
      button.title = `${entry.emoji} (${entry.sentiment})`;
      button.textContent = `:${entry.emoji}:`;
      button.addEventListener("click", () => {
        void this.pickEmoji(entry.emoji);
      });
      this.picker.appendChild(button);
    }
    const free = document.createElement("input");
    free.type = "text";
    free.className = "picker-free";
    free.placeholder = "emoji name (unknown = neutral)";
    free.addEventListener("keydown", (keyEvent) => {
      if (keyEvent.key === "Enter" && free.value.trim()) {
        void this.pickEmoji(free.value.trim());
      }
    });
    this.picker.appendChild(free);
    this.picker.hidden = false;
  }

  async pickEmoji(emoji: string): Promise<void> {
    const target = this.pickerFor;
    this.picker.hidden = true;
    this.pickerFor = null;
    if (target !== null) await this.react(target, emoji);
  }

  // --- rendering ---------------------------------------------------------------

  private render(): void {
    renderFeed(this.store, this.feedBox);
    for (const card of this.feedBox.querySelectorAll<HTMLElement>(".card")) {
      const seq = Number(card.dataset["seq"]);
      const actions = document.createElement("div");
      actions.className = "card-actions";
      const reactButton = document.createElement("button");
      reactButton.type = "button";
      reactButton.className = "react-button";
      reactButton.textContent = "react";
      reactButton.addEventListener("click", () => this.openPicker(seq));
      const replyButton = document.createElement("button");
      replyButton.type = "button";
      replyButton.className = "reply-button";
      replyButton.textContent = "reply";
      replyButton.addEventListener("click", () => this.startReply(seq));
      actions.append(reactButton, replyButton);
      card.appendChild(actions);
    }
    this.renderDue();
    this.chartBox.replaceChildren(renderEngagementChart(this.store.reportRows()));
  }

  private renderDue(): void {
    const config = this.store.currentConfig();
    if (!config) return;
    const now = new Date();
    const due = nextPostDue(config.frequency, this.store.lastBotPostTs(), now);
    this.dueLabel.textContent = `next post ${describeDue(due, now)}`;
  }
}
