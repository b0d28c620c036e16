// Chat state: the turn list, the single-in-flight rule, and error/retry
// handling. Turns store the service response verbatim; nothing is invented
// or rewritten on this side.

import { ApiClient } from "./api.js";
import { applyProfile } from "./profile.js";
import type { ChatTurn, UserProfile } from "./types.js";

export interface ChatError {
  question: string;
  message: string;
}

export class ChatState {
  turns: ChatTurn[] = [];
  pending = false;
  lastError: ChatError | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly profile: () => UserProfile,
    private readonly now: () => number = () => Date.now(),
  ) {}

  /** Ask one question; while it is pending, further asks are rejected. */
  async ask(question: string): Promise<ChatTurn | null> {
    const trimmed = question.trim();
    if (!trimmed) return null;
    if (this.pending) {
      throw new Error("a question is already pending");
    }
    const sentQuestion = applyProfile(trimmed, this.profile());
    this.pending = true;
    try {
      const response = await this.client.ask(sentQuestion);
      const turn: ChatTurn = {
        question: trimmed,
        sentQuestion,
        answer: response.answer,
        facts: response.facts,
        zeroRetrieval: response.zero_retrieval,
        timestamp: this.now(),
      };
      this.turns.push(turn);
      this.lastError = null;
      return turn;
    } catch (err) {
      this.lastError = {
        question: trimmed,
        message: err instanceof Error ? err.message : String(err),
      };
      return null;
    } finally {
      this.pending = false;
    }
  }

  /** Re-ask the question that last failed. */
  async retry(): Promise<ChatTurn | null> {
    if (this.lastError === null) return null;
    return this.ask(this.lastError.question);
  }
}
