// View state machine. Transitions are pure functions of (state, server
// response), so the view can never carry information the server did not send.

import type { AnswerResponse, NextResponse, QuestionPayload, SessionState, StartResponse, TopEntry } from "./api.js";

export type Status = "idle" | "awaiting-question" | "awaiting-answer" | "done" | "error";

export interface HistoryRow {
  round: number;
  question: string;
  answer: string;
  latencyMs: number;
  rankDelta: number | null;
}

export interface ViewState {
  sessionId: string | null;
  status: Status;
  query: string;
  question: QuestionPayload | null;
  questionShownAt: number | null;
  gallery: TopEntry[];
  history: HistoryRow[];
  round: number;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    status: "idle",
    query: "",
    question: null,
    questionShownAt: null,
    gallery: [],
    history: [],
    round: 0,
    error: null,
  };
}

export function onStarted(state: ViewState, query: string, response: StartResponse): ViewState {
  return {
    ...initialState(),
    sessionId: response.session_id,
    status: "awaiting-question",
    query,
    gallery: response.top,
    round: response.round,
  };
}

export function onQuestion(state: ViewState, response: NextResponse, now: number): ViewState {
  return {
    ...state,
    status: "awaiting-answer",
    question: response.question,
    questionShownAt: now,
    error: null,
  };
}

export function onAnswered(
  state: ViewState,
  answer: string,
  response: AnswerResponse,
  now: number,
): ViewState {
  const latencyMs = state.questionShownAt === null ? 0 : now - state.questionShownAt;
  const row: HistoryRow = {
    round: response.round,
    question: state.question?.text ?? "",
    answer,
    latencyMs,
    rankDelta: response.rank_delta ?? null,
  };
  return {
    ...state,
    status: "awaiting-question",
    question: null,
    questionShownAt: null,
    gallery: response.top,
    history: [...state.history, row],
    round: response.round,
    error: null,
  };
}

export function onExhausted(state: ViewState): ViewState {
  return { ...state, status: "done", question: null, questionShownAt: null };
}

export function onError(state: ViewState, message: string): ViewState {
  return { ...state, status: "error", error: message };
}

export function onResumed(state: ViewState, sessionId: string, snapshot: SessionState, now: number): ViewState {
  const history: HistoryRow[] = snapshot.record.rounds.map((round) => ({
    round: round.round_index,
    question: round.question.text,
    answer: round.answer,
    latencyMs: round.answer_latency_s * 1000,
    rankDelta: null,
  }));
  let status: Status = snapshot.exhausted ? "done" : "awaiting-question";
  if (snapshot.pending_question !== null) status = "awaiting-answer";
  return {
    sessionId,
    status,
    query: snapshot.record.initial_query,
    question: snapshot.pending_question,
    questionShownAt: snapshot.pending_question === null ? null : now,
    gallery: snapshot.top,
    history,
    round: snapshot.round,
    error: null,
  };
}

export function canSubmitAnswer(state: ViewState, input: string): boolean {
  return state.status === "awaiting-answer" && input.trim().length > 0;
}

export function canAskQuestion(state: ViewState): boolean {
  return state.status === "awaiting-question" && state.sessionId !== null;
}
