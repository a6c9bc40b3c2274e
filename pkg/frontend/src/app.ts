// Single-page session flow: query form -> round-0 gallery -> ask/answer loop
// -> export. No router; the session id lives in the URL fragment so a tab
// reload resumes the same session.

import { ApiError, SessionApi } from "./api.js";
import type { SessionRecord, TopEntry } from "./api.js";
import {
  canAskQuestion,
  canSubmitAnswer,
  initialState,
  onAnswered,
  onError,
  onExhausted,
  onQuestion,
  onResumed,
  onStarted,
} from "./state.js";
import type { ViewState } from "./state.js";

type Clock = () => number;

const GALLERY_SIZE = 10;

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

export class SessionApp {
  state: ViewState = initialState();

  private root: HTMLElement;
  private api: SessionApi;
  private clock: Clock;
  private lastAction: (() => Promise<void>) | null = null;

  // stable nodes, rebuilt content on render
  private queryInput!: HTMLInputElement;
  private startButton!: HTMLButtonElement;
  private askButton!: HTMLButtonElement;
  private questionBox!: HTMLElement;
  private answerInput!: HTMLInputElement;
  private answerButton!: HTMLButtonElement;
  private galleryBox!: HTMLElement;
  private historyBox!: HTMLElement;
  private statusBox!: HTMLElement;
  private errorBox!: HTMLElement;
  private exportButton!: HTMLButtonElement;

  constructor(root: HTMLElement, api: SessionApi, clock: Clock = () => performance.now()) {
    this.root = root;
    this.api = api;
    this.clock = clock;
    this.mount();
    this.render();
  }

  // -- scaffolding -----------------------------------------------------------

  private mount(): void {
    this.root.innerHTML = "";

    const form = el("form", "query-form");
    this.queryInput = el("input");
    this.queryInput.type = "text";
    this.queryInput.placeholder = "Describe the video you are looking for";
    this.queryInput.id = "query-input";
    this.startButton = el("button", "", "Search");
    this.startButton.type = "submit";
    this.startButton.id = "start-button";
    form.append(this.queryInput, this.startButton);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.start(this.queryInput.value);
    });

    this.statusBox = el("div", "status");
    this.statusBox.id = "status";
    this.errorBox = el("div", "error");
    this.errorBox.id = "error";

    this.askButton = el("button", "", "Ask me a question");
    this.askButton.id = "ask-button";
    this.askButton.addEventListener("click", () => void this.askNext());

    this.questionBox = el("div", "question");
    this.questionBox.id = "question";
    this.answerInput = el("input");
    this.answerInput.type = "text";
    this.answerInput.id = "answer-input";
    this.answerInput.placeholder = "Your answer";
    this.answerInput.addEventListener("input", () => this.syncControls());
    this.answerButton = el("button", "", "Send answer");
    this.answerButton.id = "answer-button";
    this.answerButton.addEventListener("click", () => void this.submitAnswer(this.answerInput.value));

    this.exportButton = el("button", "", "Export session log");
    this.exportButton.id = "export-button";
    this.exportButton.addEventListener("click", () => void this.exportRecord(true));

    this.galleryBox = el("div", "gallery");
    this.galleryBox.id = "gallery";
    this.historyBox = el("div", "history");
    this.historyBox.id = "history";

    const controls = el("div", "controls");
    controls.append(this.askButton, this.questionBox, this.answerInput, this.answerButton, this.exportButton);

    this.root.append(form, this.statusBox, this.errorBox, controls, this.galleryBox, this.historyBox);
  }

  /** Resume the session named in the URL fragment, if any. */
  async resumeFromFragment(fragment: string): Promise<boolean> {
    const sessionId = fragment.replace(/^#/, "");
    if (!sessionId) return false;
    try {
      const snapshot = await this.api.state(sessionId);
      this.state = onResumed(this.state, sessionId, snapshot, this.clock());
      this.render();
      return true;
    } catch (error) {
      this.fail(error, () => this.resumeFromFragment(fragment));
      return false;
    }
  }

  // -- user actions ------------------------------------------------------------

  async start(query: string, target?: string, config?: Record<string, unknown>): Promise<void> {
    const trimmed = query.trim();
    if (!trimmed) return;
    this.lastAction = () => this.start(query, target, config);
    try {
      target ??= new URLSearchParams(window.location.search).get("target") ?? undefined;
      const response = await this.api.start(trimmed, target, config);
      this.state = onStarted(this.state, trimmed, response);
      window.location.hash = response.session_id;
      this.render();
    } catch (error) {
      this.fail(error);
    }
  }

  async askNext(): Promise<void> {
    if (!canAskQuestion(this.state) || this.state.sessionId === null) return;
    this.lastAction = () => this.askNext();
    try {
      const response = await this.api.next(this.state.sessionId);
      this.state = onQuestion(this.state, response, this.clock());
      this.render();
    } catch (error) {
      if (error instanceof ApiError && error.status === 410) {
        this.state = onExhausted(this.state);
        this.render();
        return;
      }
      this.fail(error);
    }
  }

  async submitAnswer(text: string): Promise<void> {
    if (!canSubmitAnswer(this.state, text) || this.state.sessionId === null) return;
    this.lastAction = () => this.submitAnswer(text);
    const now = this.clock();
    const latencyMs = this.state.questionShownAt === null ? 0 : now - this.state.questionShownAt;
    try {
      const response = await this.api.answer(this.state.sessionId, text.trim(), latencyMs);
      this.state = onAnswered(this.state, text.trim(), response, now);
      this.answerInput.value = "";
      this.render();
    } catch (error) {
      this.fail(error);
    }
  }

  /** Fetch the server-side session record; optionally trigger a download. */
  async exportRecord(download = false): Promise<SessionRecord | null> {
    if (this.state.sessionId === null) return null;
    try {
      const record = await this.api.record(this.state.sessionId);
      if (download) this.download(record);
      return record;
    } catch (error) {
      this.fail(error);
      return null;
    }
  }

  async retry(): Promise<void> {
    if (this.lastAction) await this.lastAction();
  }

  private download(record: SessionRecord): void {
    try {
      const blob = new Blob([JSON.stringify(record, null, 2)], { type: "application/json" });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = `session-${this.state.sessionId}.json`;
      link.click();
      URL.revokeObjectURL(link.href);
    } catch {
      // download is best-effort; headless DOMs may not support object URLs
    }
  }

  private fail(error: unknown, retry?: () => Promise<unknown>): void {
    let message = error instanceof Error ? error.message : String(error);
    if (error instanceof ApiError && error.status === 404) {
      message = `${message} - the server may have restarted; start a new session`;
    }
    if (retry) this.lastAction = () => retry().then(() => undefined);
    this.state = onError(this.state, message);
    this.render();
  }

  // -- rendering ------------------------------------------------------------------

  private render(): void {
    this.renderStatus();
    this.renderQuestion();
    this.renderGallery();
    this.renderHistory();
    this.syncControls();
  }

  private renderStatus(): void {
    const labels: Record<string, string> = {
      idle: "Enter a query to begin.",
      "awaiting-question": `Round ${this.state.round} - ask for a question to refine the results.`,
      "awaiting-answer": "Answer the question to refine the results.",
      done: "No more questions - session complete. Export the log below.",
      error: "Something went wrong.",
    };
    this.statusBox.textContent = labels[this.state.status] ?? "";
    this.statusBox.dataset.status = this.state.status;

    this.errorBox.innerHTML = "";
    if (this.state.error !== null) {
      this.errorBox.append(el("span", "error-message", this.state.error));
      const retry = el("button", "retry", "Retry");
      retry.id = "retry-button";
      retry.addEventListener("click", () => void this.retry());
      this.errorBox.append(retry);
    }
  }

  private renderQuestion(): void {
    this.questionBox.innerHTML = "";
    if (this.state.question !== null) {
      this.questionBox.append(el("span", "question-kind", `[${this.state.question.kind}]`));
      this.questionBox.append(el("span", "question-text", this.state.question.text));
    }
  }

  private renderGallery(): void {
    this.galleryBox.innerHTML = "";
    for (const [position, entry] of this.state.gallery.slice(0, GALLERY_SIZE).entries()) {
      this.galleryBox.append(this.tile(position + 1, entry));
    }
  }

  private tile(position: number, entry: TopEntry): HTMLElement {
    const tile = el("div", "tile");
    tile.dataset.videoId = entry.video_id;
    const thumb = el("div", "thumb");
    if (entry.media_uri && /^https?:/.test(entry.media_uri)) {
      const img = el("img");
      img.src = entry.media_uri;
      img.alt = entry.video_id;
      thumb.append(img);
    } else {
      thumb.classList.add("placeholder");
      thumb.textContent = entry.video_id.slice(0, 8);
    }
    tile.append(
      el("span", "rank", `#${position}`),
      thumb,
      el("span", "video-id", entry.video_id),
      el("span", "score", entry.score.toFixed(4)),
    );
    return tile;
  }

  private renderHistory(): void {
    this.historyBox.innerHTML = "";
    for (const row of this.state.history) {
      const item = el("div", "history-row");
      item.dataset.round = String(row.round);
      const movement =
        row.rankDelta === null
          ? ""
          : row.rankDelta > 0
            ? ` (target up ${row.rankDelta})`
            : row.rankDelta < 0
              ? ` (target down ${-row.rankDelta})`
              : " (no change)";
      item.append(
        el("span", "history-q", `Q${row.round}: ${row.question}`),
        el("span", "history-a", `A${row.round}: ${row.answer}${movement}`),
        el("span", "history-latency", `${(row.latencyMs / 1000).toFixed(2)}s`),
      );
      this.historyBox.append(item);
    }
  }

  private syncControls(): void {
    this.askButton.disabled = !canAskQuestion(this.state);
    this.answerButton.disabled = !canSubmitAnswer(this.state, this.answerInput.value);
    this.answerInput.disabled = this.state.status !== "awaiting-answer";
    this.exportButton.disabled = this.state.sessionId === null;
    this.startButton.disabled = false;
  }
}
