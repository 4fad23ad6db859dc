import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatSession } from "../src/session.js";

const info = {
  session_id: "abc",
  run: "ddq10",
  goal: { constraints: { moviename: "batman" }, requests: ["ticket", "theater"] },
  max_turns: 40,
  opening_prompt: "go",
};

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function clientWith(handler: (url: string, init?: RequestInit) => Response | Promise<Response>) {
  const fetchFn = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) =>
    handler(String(url), init),
  );
  return { client: new ApiClient("", fetchFn as unknown as typeof fetch), fetchFn };
}

const userAct = { intent: "inform", inform_slots: { moviename: "batman" }, request_slots: [] };

describe("ChatSession.sendTurn", () => {
  it("appends both acts and syncs the turn counter", async () => {
    const { client } = clientWith((url) => {
      if (url.endsWith("/turns")) {
        return jsonResponse({
          terminal: false,
          agent_act: { intent: "request", inform_slots: {}, request_slots: ["starttime"] },
          agent_text: "What time?",
          turn_count: 1,
        });
      }
      throw new Error(`unexpected ${url}`);
    });
    const session = new ChatSession(client, info);
    const result = await session.sendTurn(userAct);
    expect(result?.turn_count).toBe(1);
    const view = session.view();
    expect(view.turnCount).toBe(1);
    expect(view.transcript.map((t) => t.actor)).toEqual(["user", "agent"]);
  });

  it("strictly alternates actors across several turns", async () => {
    let turn = 0;
    const { client } = clientWith(() =>
      jsonResponse({
        terminal: false,
        agent_act: { intent: "thanks", inform_slots: {}, request_slots: [] },
        turn_count: ++turn,
      }),
    );
    const session = new ChatSession(client, info);
    await session.sendTurn(userAct);
    await session.sendTurn(userAct);
    await session.sendTurn(userAct);
    const actors = session.view().transcript.map((t) => t.actor);
    expect(actors).toEqual(["user", "agent", "user", "agent", "user", "agent"]);
  });

  it("keeps the turn id across a network failure so a retry cannot double-send", async () => {
    const turnIds: string[] = [];
    let fail = true;
    const { client } = clientWith((url, init) => {
      if (url.endsWith("/turns")) {
        turnIds.push(JSON.parse(String(init?.body)).turn_id);
        if (fail) {
          fail = false;
          throw new Error("network down");
        }
        return jsonResponse({ terminal: false, turn_count: 1 });
      }
      throw new Error(`unexpected ${url}`);
    });
    const session = new ChatSession(client, info);
    await expect(session.sendTurn(userAct)).rejects.toThrow("network down");
    expect(session.view().lastError).toContain("network down");
    await session.sendTurn(userAct);
    expect(turnIds).toEqual(["t0", "t0"]);
  });

  it("resyncs on a duplicate-turn conflict", async () => {
    let posted = 0;
    const { client } = clientWith((url) => {
      if (url.endsWith("/turns")) {
        posted += 1;
        return jsonResponse({ detail: "duplicate turn id" }, 409);
      }
      return jsonResponse({
        session_id: "abc", run: "ddq10", status: "active", turn_count: 1,
        max_turns: 40, dialogue_over: false, goal: info.goal,
        transcript: [{ actor: "user", act: userAct }],
      });
    });
    const session = new ChatSession(client, info);
    const result = await session.sendTurn(userAct);
    expect(result).toBeNull();
    expect(posted).toBe(1);
    expect(session.view().turnCount).toBe(1);
  });

  it("locks the session on a turn-limit terminal", async () => {
    const { client } = clientWith(() =>
      jsonResponse({
        terminal: true, reason: "turn_limit", status: "failed", turn_count: 40,
        agent_act: { intent: "closing", inform_slots: {}, request_slots: [] },
      }),
    );
    const session = new ChatSession(client, info);
    await session.sendTurn(userAct);
    expect(session.view().phase).toBe("closed");
    expect(session.canSend()).toBe(false);
    await expect(session.sendTurn(userAct)).rejects.toThrow(/cannot send/);
  });
});

describe("ChatSession.finish", () => {
  it("submits feedback exactly once", async () => {
    let feedbackPosts = 0;
    const { client } = clientWith((url) => {
      if (url.endsWith("/feedback")) {
        feedbackPosts += 1;
        return jsonResponse({
          status: "succeeded", reason: "user_judged", committed_tuples: 3,
          episode_return: 77, epoch: 1,
        });
      }
      throw new Error(`unexpected ${url}`);
    });
    const session = new ChatSession(client, info);
    const first = await session.finish(true);
    const second = await session.finish(true);  // double click
    expect(feedbackPosts).toBe(1);
    expect(first?.status).toBe("succeeded");
    expect(second).toBe(first);
    expect(session.view().phase).toBe("closed");
  });

  it("abandon closes the session as failure", async () => {
    const { client } = clientWith((url) => {
      if (url.endsWith("/abandon")) {
        return jsonResponse({
          status: "abandoned", reason: "abandoned", committed_tuples: 2,
          episode_return: -42, epoch: 1,
        });
      }
      throw new Error(`unexpected ${url}`);
    });
    const session = new ChatSession(client, info);
    const outcome = await session.abandon();
    expect(outcome?.status).toBe("abandoned");
    expect(session.view().status).toBe("abandoned");
    expect(session.canSend()).toBe(false);
  });
});
