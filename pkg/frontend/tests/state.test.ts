import { describe, expect, it } from "vitest";

import type { AnswerResponse, NextResponse, StartResponse } from "../src/api.js";
import {
  canAskQuestion,
  canSubmitAnswer,
  initialState,
  onAnswered,
  onError,
  onExhausted,
  onQuestion,
  onStarted,
} from "../src/state.js";

const startResponse: StartResponse = {
  session_id: "abc123",
  round: 0,
  top: [{ video_id: "v0001", score: 0.42, itm_score: null, media_uri: "" }],
};

const nextResponse: NextResponse = {
  question: { text: "what is the man doing?", kind: "action", segment: "whole" },
  round: 1,
};

const answerResponse: AnswerResponse = {
  round: 1,
  top: [{ video_id: "v0002", score: 0.9, itm_score: 0.5, media_uri: "" }],
  rank_delta: 12,
  rank: 1,
};

describe("view state transitions", () => {
  it("starts in idle with nothing submittable", () => {
    const state = initialState();
    expect(state.status).toBe("idle");
    expect(canAskQuestion(state)).toBe(false);
    expect(canSubmitAnswer(state, "anything")).toBe(false);
  });

  it("start -> awaiting-question with the round-0 gallery", () => {
    const state = onStarted(initialState(), "a man", startResponse);
    expect(state.status).toBe("awaiting-question");
    expect(state.sessionId).toBe("abc123");
    expect(state.gallery).toHaveLength(1);
    expect(canAskQuestion(state)).toBe(true);
  });

  it("question -> awaiting-answer; submit only with non-empty input", () => {
    let state = onStarted(initialState(), "a man", startResponse);
    state = onQuestion(state, nextResponse, 1000);
    expect(state.status).toBe("awaiting-answer");
    expect(state.questionShownAt).toBe(1000);
    expect(canSubmitAnswer(state, "")).toBe(false);
    expect(canSubmitAnswer(state, "   ")).toBe(false);
    expect(canSubmitAnswer(state, "singing")).toBe(true);
    expect(canAskQuestion(state)).toBe(false);
  });

  it("answer appends history with latency from the monotonic clock", () => {
    let state = onStarted(initialState(), "a man", startResponse);
    state = onQuestion(state, nextResponse, 1000);
    state = onAnswered(state, "singing", answerResponse, 1350);
    expect(state.status).toBe("awaiting-question");
    expect(state.history).toHaveLength(1);
    expect(state.history[0]).toMatchObject({
      round: 1,
      question: "what is the man doing?",
      answer: "singing",
      latencyMs: 350,
      rankDelta: 12,
    });
    expect(state.gallery[0].video_id).toBe("v0002");
  });

  it("history is append-only across rounds", () => {
    let state = onStarted(initialState(), "a man", startResponse);
    state = onQuestion(state, nextResponse, 0);
    state = onAnswered(state, "singing", answerResponse, 10);
    const first = state.history[0];
    state = onQuestion(state, { ...nextResponse, round: 2 }, 20);
    state = onAnswered(state, "street", { ...answerResponse, round: 2 }, 35);
    expect(state.history).toHaveLength(2);
    expect(state.history[0]).toEqual(first);
  });

  it("exhaustion leads to done; errors keep the session", () => {
    let state = onStarted(initialState(), "a man", startResponse);
    state = onExhausted(state);
    expect(state.status).toBe("done");
    state = onError(state, "boom");
    expect(state.status).toBe("error");
    expect(state.sessionId).toBe("abc123");
  });
});
