// Client-side session state: transcript, server-synced turn counter, and the
// single-feedback lifecycle. Each turn waits for the server's acknowledgment
// (no optimistic updates); a failed send keeps its turn id so a retry cannot
// double-submit.

import { ActPayload, ApiClient, ApiError, FeedbackResult, SessionInfo, TurnResult } from "./api.js";

export type SessionPhase = "active" | "awaiting_feedback" | "closed";

export interface TranscriptEntry {
  actor: "user" | "agent";
  act: ActPayload;
  text?: string;
}

export interface SessionView {
  phase: SessionPhase;
  status: string;
  turnCount: number;
  maxTurns: number;
  transcript: TranscriptEntry[];
  outcome?: FeedbackResult;
  lastError?: string;
}

export class ChatSession {
  readonly info: SessionInfo;
  private client: ApiClient;
  private transcript: TranscriptEntry[] = [];
  private phase: SessionPhase = "active";
  private status = "active";
  private turnCount = 0;
  private outcome?: FeedbackResult;
  private lastError?: string;
  private nextTurnSerial = 0;
  private pendingTurnId: string | null = null;
  private sendInFlight = false;
  private feedbackSent = false;
  private listeners: (() => void)[] = [];

  constructor(client: ApiClient, info: SessionInfo) {
    this.client = client;
    this.info = info;
  }

  static async create(client: ApiClient): Promise<ChatSession> {
    return new ChatSession(client, await client.createSession());
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  view(): SessionView {
    return {
      phase: this.phase,
      status: this.status,
      turnCount: this.turnCount,
      maxTurns: this.info.max_turns,
      transcript: [...this.transcript],
      outcome: this.outcome,
      lastError: this.lastError,
    };
  }

  canSend(): boolean {
    return this.phase === "active" && !this.sendInFlight;
  }

  /** Send one user act; reuses the pending turn id after a network failure so
   * the server-side dedupe makes retries safe. */
  async sendTurn(act: ActPayload): Promise<TurnResult | null> {
    if (!this.canSend()) {
      throw new Error(`cannot send in phase ${this.phase}`);
    }
    if (this.pendingTurnId === null) {
      this.pendingTurnId = `t${this.nextTurnSerial++}`;
    }
    const turnId = this.pendingTurnId;
    this.sendInFlight = true;
    this.lastError = undefined;
    this.emit();
    try {
      const result = await this.client.postTurn(this.info.session_id, turnId, act);
      this.pendingTurnId = null;
      this.transcript.push({ actor: "user", act });
      if (result.agent_act) {
        this.transcript.push({ actor: "agent", act: result.agent_act, text: result.agent_text });
      }
      this.turnCount = result.turn_count;
      if (result.terminal) {
        if (result.status === "failed") {
          this.phase = "closed";
          this.status = "failed";
        } else {
          this.phase = "awaiting_feedback";
        }
      }
      return result;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // duplicate turn id: the first delivery won after all; resync
        this.pendingTurnId = null;
        await this.resync();
        return null;
      }
      this.lastError = error instanceof Error ? error.message : String(error);
      throw error;
    } finally {
      this.sendInFlight = false;
      this.emit();
    }
  }

  /** Re-pull authoritative state from the server. */
  async resync(): Promise<void> {
    const status = await this.client.getSession(this.info.session_id);
    this.turnCount = status.turn_count;
    this.status = status.status;
    this.transcript = status.transcript.map((entry) => ({
      actor: entry.actor as "user" | "agent",
      act: entry.act,
    }));
    if (status.status !== "active") {
      this.phase = "closed";
    } else if (status.dialogue_over) {
      this.phase = "awaiting_feedback";
    }
    this.emit();
  }

  /** Exactly one feedback submission; later calls are no-ops. */
  async finish(success: boolean): Promise<FeedbackResult | undefined> {
    if (this.feedbackSent || this.phase === "closed") {
      return this.outcome;
    }
    this.feedbackSent = true;
    try {
      this.outcome = await this.client.postFeedback(this.info.session_id, success);
    } catch (error) {
      if (!(error instanceof ApiError && error.status === 409)) {
        this.feedbackSent = false;
        throw error;
      }
    }
    this.phase = "closed";
    this.status = this.outcome?.status ?? this.status;
    this.emit();
    return this.outcome;
  }

  async abandon(): Promise<FeedbackResult | undefined> {
    if (this.feedbackSent || this.phase === "closed") {
      return this.outcome;
    }
    this.feedbackSent = true;
    try {
      this.outcome = await this.client.abandonSession(this.info.session_id);
    } catch (error) {
      if (!(error instanceof ApiError && error.status === 409)) {
        this.feedbackSent = false;
        throw error;
      }
    }
    this.phase = "closed";
    this.status = "abandoned";
    this.emit();
    return this.outcome;
  }
}
