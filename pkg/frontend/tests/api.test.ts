import { describe, expect, it } from "vitest";
import { ApiError, FrameStream, fetchState, sendEvent } from "../src/api.js";
import type { PushFrame, StateDoc } from "../src/types.js";

function jsonResponse(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
    });
}

describe("sendEvent", () => {
    it("posts the documented body shapes", async () => {
        const seen: { url: string; body: string }[] = [];
        const fake: typeof fetch = async (url, init) => {
            seen.push({ url: String(url), body: String(init?.body) });
            return jsonResponse(200, { state: "ACTIVE", seq: 1 });
        };
        await sendEvent("http://relay", "query", undefined, fake);
        await sendEvent("http://relay", "submit", "can we continue?", fake);
        expect(seen[0]).toEqual({
            url: "http://relay/api/v1/event",
            body: JSON.stringify({ event: "query" }),
        });
        expect(JSON.parse(seen[1]!.body)).toEqual({ event: "submit", text: "can we continue?" });
    });

    it("raises ApiError with the server detail on 400", async () => {
        const fake: typeof fetch = async () => jsonResponse(400, { detail: "submit requires non-empty text" });
        await expect(sendEvent("", "submit", "", fake)).rejects.toMatchObject({
            status: 400,
            message: "submit requires non-empty text",
        });
    });

    it("times out when no acknowledgment arrives", async () => {
        const fake: typeof fetch = (_url, init) =>
            new Promise((_resolve, reject) => {
                init?.signal?.addEventListener("abort", () =>
                    reject(new DOMException("aborted", "AbortError")),
                );
            });
        await expect(sendEvent("", "query", undefined, fake, 30)).rejects.toThrow(/30 ms/);
    });

    it("wraps network failures", async () => {
        const fake: typeof fetch = async () => {
            throw new TypeError("fetch failed");
        };
        await expect(sendEvent("", "arm", undefined, fake)).rejects.toBeInstanceOf(ApiError);
    });
});

describe("fetchState", () => {
    it("returns the parsed document", async () => {
        const fake: typeof fetch = async (url) => {
            expect(String(url)).toBe("http://relay/api/v1/state");
            return jsonResponse(200, { state: "ACTIVE", seq: 7, last_advisory: "hold" });
        };
        expect(await fetchState("http://relay", fake)).toEqual({
            state: "ACTIVE",
            seq: 7,
            last_advisory: "hold",
        });
    });
});

function sseResponse(payload: string): Response {
    const stream = new ReadableStream<Uint8Array>({
        start(controller) {
            controller.enqueue(new TextEncoder().encode(payload));
            // leave the stream open like a real push channel
        },
    });
    return new Response(stream, { status: 200 });
}

describe("FrameStream", () => {
    it("re-syncs from /state before forwarding frames, skipping keepalives", async () => {
        const doc: StateDoc = { state: "ACTIVE", seq: 3, last_advisory: "prior" };
        const payload =
            ": keepalive\n\n" +
            'data: {"kind":"ADVISORY","state":"ACTIVE","seq":4,"text":"new advice"}\n\n';
        const fake: typeof fetch = async (url) =>
            String(url).endsWith("/api/v1/state") ? jsonResponse(200, doc) : sseResponse(payload);

        const resyncs: StateDoc[] = [];
        const frames: PushFrame[] = [];
        const connections: boolean[] = [];
        const stream = new FrameStream(
            "",
            {
                onResync: (d) => resyncs.push(d),
                onFrame: (f) => frames.push(f),
                onConnection: (c) => connections.push(c),
            },
            fake,
        );
        stream.start();
        await new Promise((resolve) => setTimeout(resolve, 50));
        stream.stop();

        expect(resyncs).toEqual([doc]);
        expect(frames).toEqual([{ kind: "ADVISORY", state: "ACTIVE", seq: 4, text: "new advice" }]);
        expect(connections[0]).toBe(true);
    });

    it("retries with growing backoff while the relay is down", async () => {
        const attempts: number[] = [];
        const started = Date.now();
        const fake: typeof fetch = async () => {
            attempts.push(Date.now() - started);
            throw new TypeError("connection refused");
        };
        const statuses: boolean[] = [];
        const stream = new FrameStream(
            "",
            { onResync: () => {}, onFrame: () => {}, onConnection: (c) => statuses.push(c) },
            fake,
        );
        stream.start();
        await new Promise((resolve) => setTimeout(resolve, 1700));
        stream.stop();

        // 0 ms, then ~500, then ~1500 (500 + 1000): doubling, not constant.
        expect(attempts.length).toBe(3);
        expect(attempts[1]).toBeGreaterThanOrEqual(400);
        expect(attempts[2]! - attempts[1]!).toBeGreaterThanOrEqual(900);
        expect(statuses.every((s) => s === false)).toBe(true);
    });
});
