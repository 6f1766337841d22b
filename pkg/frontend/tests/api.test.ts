import { describe, expect, it, vi } from "vitest";

import { AbxApi, ApiError } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("api client", () => {
  it("posts session creation with the requested size", async () => {
    const fetchFn = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      expect(String(url)).toBe("/sessions");
      expect(init?.method).toBe("POST");
      expect(JSON.parse(String(init?.body))).toEqual({ n_trials: 50, listener: "me" });
      return jsonResponse(200, { session_id: "abc", num_trials: 50 });
    });
    const api = new AbxApi("", fetchFn as typeof fetch);
    const created = await api.createSession(50, "me");
    expect(created.session_id).toBe("abc");
  });

  it("wraps HTTP errors with status and server detail", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(409, { detail: "already answered" }));
    const api = new AbxApi("", fetchFn as typeof fetch);
    await expect(api.submitResponse("s", 0, "A")).rejects.toMatchObject({
      status: 409,
      message: "already answered",
    });
  });

  it("maps network failures to status 0", async () => {
    const fetchFn = vi.fn(async () => {
      throw new TypeError("connection refused");
    });
    const api = new AbxApi("", fetchFn as typeof fetch);
    const failure = await api.stats("s").catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(0);
  });

  it("submits choices verbatim", async () => {
    const fetchFn = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      expect(String(url)).toBe("/sessions/s/trials/3/response");
      expect(JSON.parse(String(init?.body))).toEqual({ choice: "B" });
      return jsonResponse(200, { recorded: true, answered: 4, total: 50 });
    });
    const api = new AbxApi("", fetchFn as typeof fetch);
    const ack = await api.submitResponse("s", 3, "B");
    expect(ack.answered).toBe(4);
  });
});
