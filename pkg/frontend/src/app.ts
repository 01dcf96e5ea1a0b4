import { ApiClient, ApiError } from "./api.js";
import { createBubble, el } from "./bubbles.js";
import type { StorageLike, TurnRecordWire, UiMessage } from "./types.js";

const SESSION_KEY = "stepchat.session";
const DEBUG_KEY = "stepchat.debug";

export interface ChatAppOptions {
  root: HTMLElement;
  api: ApiClient;
  /** survives reloads; holds the session id */
  storage: StorageLike;
  /** per-tab; holds the debug-panel toggle */
  tabStorage: StorageLike;
}

/**
 * The chat client. Renders bubbles in arrival order and performs no dialogue
 * logic of its own: every state change shown to the user originates from a
 * turn response or the stored history.
 */
export class ChatApp {
  readonly messages: UiMessage[] = [];
  sessionId: string | null = null;
  busy = false;

  private readonly api: ApiClient;
  private readonly storage: StorageLike;
  private readonly tabStorage: StorageLike;
  private readonly root: HTMLElement;
  private messagesEl!: HTMLElement;
  private inputEl!: HTMLInputElement;
  private sendBtn!: HTMLButtonElement;
  private bannerEl!: HTMLElement;

  constructor(options: ChatAppOptions) {
    this.api = options.api;
    this.storage = options.storage;
    this.tabStorage = options.tabStorage;
    this.root = options.root;
    this.buildSkeleton();
    if (this.tabStorage.getItem(DEBUG_KEY) === "1") {
      this.root.classList.add("debug-on");
    }
  }

  private buildSkeleton(): void {
    this.root.classList.add("chat-app");
    const header = el("header");
    header.appendChild(el("span", "title", "stepchat"));
    const debugBtn = el("button", "debug-toggle", "debug");
    debugBtn.type = "button";
    debugBtn.addEventListener("click", () => this.toggleDebug());
    header.appendChild(debugBtn);
    this.root.appendChild(header);

    this.bannerEl = el("div", "banner");
    this.bannerEl.hidden = true;
    this.root.appendChild(this.bannerEl);

    this.messagesEl = el("div", "messages");
    this.root.appendChild(this.messagesEl);

    const form = el("form", "composer");
    this.inputEl = el("input");
    this.inputEl.placeholder = "Say something…";
    this.sendBtn = el("button", "send", "Send");
    this.sendBtn.type = "submit";
    form.appendChild(this.inputEl);
    form.appendChild(this.sendBtn);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.send(this.inputEl.value);
    });
    this.root.appendChild(form);
  }

  get debugVisible(): boolean {
    return this.root.classList.contains("debug-on");
  }

  toggleDebug(): void {
    this.root.classList.toggle("debug-on");
    this.tabStorage.setItem(DEBUG_KEY, this.debugVisible ? "1" : "0");
  }

  /** Resume the stored session via the history endpoint, or start fresh. */
  async init(): Promise<void> {
    this.bannerEl.hidden = true;
    const stored = this.storage.getItem(SESSION_KEY);
    try {
      if (stored) {
        const turns = await this.api.history(stored);
        this.sessionId = stored;
        for (const turn of turns) {
          this.renderStoredTurn(turn);
        }
        return;
      }
      await this.startNewSession();
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        await this.startNewSession();
        this.push({ role: "notice", text: "Previous session expired — started a new one." });
        return;
      }
      this.showBanner("Can't reach the assistant service.");
    }
  }

  private async startNewSession(): Promise<void> {
    this.sessionId = await this.api.createSession();
    this.storage.setItem(SESSION_KEY, this.sessionId);
  }

  private renderStoredTurn(turn: TurnRecordWire): void {
    this.push({ role: "user", text: turn.user_utterance });
    this.push({
      role: "system",
      text: turn.system_response,
      screen: turn.screen,
      debug: { action_code: turn.action_code, policy: turn.policy },
    });
  }

  /** One in-flight turn at a time; empty input is blocked client-side. */
  async send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || this.busy || !this.sessionId) return;
    this.push({ role: "user", text: trimmed }); // optimistic
    this.inputEl.value = "";
    this.setBusy(true);
    try {
      const response = await this.api.sendTurn(this.sessionId, trimmed);
      this.push({
        role: "system",
        text: response.response_text,
        screen: response.screen,
        debug: { action_code: response.debug.action_code, policy: response.debug.policy },
      });
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        await this.startNewSession().catch(() => this.showBanner("Can't reach the assistant service."));
        this.push({ role: "notice", text: "Session expired — started a new one. Say that again?" });
      } else {
        const status = error instanceof ApiError ? ` (HTTP ${error.status})` : "";
        this.push({ role: "notice", text: `Something went wrong${status} — try again.` });
      }
    } finally {
      this.setBusy(false);
      this.inputEl.focus();
    }
  }

  private setBusy(busy: boolean): void {
    this.busy = busy;
    this.inputEl.disabled = busy;
    this.sendBtn.disabled = busy;
    for (const chip of this.messagesEl.querySelectorAll<HTMLButtonElement>(".chip")) {
      chip.disabled = busy;
    }
  }

  private showBanner(message: string): void {
    this.bannerEl.hidden = false;
    this.bannerEl.textContent = "";
    this.bannerEl.appendChild(el("span", "", message));
    const retry = el("button", "retry", "Retry");
    retry.type = "button";
    retry.addEventListener("click", () => void this.init());
    this.bannerEl.appendChild(retry);
  }

  private push(message: UiMessage): void {
    this.messages.push(message);
    const bubble = createBubble(message, { onChip: (option) => void this.send(option) });
    this.messagesEl.appendChild(bubble);
    this.messagesEl.scrollTop = this.messagesEl.scrollHeight;
  }
}
