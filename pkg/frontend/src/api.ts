import type { EventKind, PushFrame, StateDoc } from "./types.js";

export class ApiError extends Error {
    constructor(
        message: string,
        readonly status: number | null = null,
    ) {
        super(message);
    }
}

type FetchFn = typeof fetch;

async function errorDetail(response: Response): Promise<string> {
    try {
        const body = await response.json();
        if (body && typeof body.detail === "string") {
            return body.detail;
        }
    } catch {
        // fall through to the generic message
    }
    return `server responded ${response.status}`;
}

/** POST a UI event; rejects with ApiError on 4xx/5xx or after timeoutMs. */
export async function sendEvent(
    baseUrl: string,
    kind: EventKind,
    text?: string,
    fetchFn: FetchFn = fetch,
    timeoutMs = 2000,
): Promise<StateDoc> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), timeoutMs);
    const body: Record<string, string> = { event: kind };
    if (text !== undefined) {
        body.text = text;
    }
    try {
        const response = await fetchFn(baseUrl + "/api/v1/event", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
            signal: controller.signal,
        });
        if (!response.ok) {
            throw new ApiError(await errorDetail(response), response.status);
        }
        return (await response.json()) as StateDoc;
    } catch (err) {
        if (err instanceof ApiError) {
            throw err;
        }
        if (controller.signal.aborted) {
            throw new ApiError(`no acknowledgment within ${timeoutMs} ms`);
        }
        throw new ApiError(String(err));
    } finally {
        clearTimeout(timer);
    }
}

export async function fetchState(baseUrl: string, fetchFn: FetchFn = fetch): Promise<StateDoc> {
    const response = await fetchFn(baseUrl + "/api/v1/state");
    if (!response.ok) {
        throw new ApiError(await errorDetail(response), response.status);
    }
    return (await response.json()) as StateDoc;
}

export interface StreamHandlers {
    onFrame: (frame: PushFrame) => void;
    onResync: (doc: StateDoc) => void;
    onConnection: (connected: boolean) => void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 8000;

/**
 * Long-lived reader of /api/v1/stream.  On every (re)connect it first
 * re-syncs from /api/v1/state, then forwards frames; a drop schedules a
 * retry with doubling backoff capped at 8 s.
 */
export class FrameStream {
    private stopped = false;
    private backoffMs = BACKOFF_START_MS;
    private timer: ReturnType<typeof setTimeout> | null = null;

    constructor(
        private readonly baseUrl: string,
        private readonly handlers: StreamHandlers,
        private readonly fetchFn: FetchFn = fetch,
    ) {}

    start(): void {
        void this.connect();
    }

    stop(): void {
        this.stopped = true;
        if (this.timer !== null) {
            clearTimeout(this.timer);
        }
    }

    private scheduleRetry(): void {
        if (this.stopped) {
            return;
        }
        this.handlers.onConnection(false);
        this.timer = setTimeout(() => void this.connect(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_CAP_MS);
    }

    private async connect(): Promise<void> {
        try {
            const doc = await fetchState(this.baseUrl, this.fetchFn);
            const response = await this.fetchFn(this.baseUrl + "/api/v1/stream");
            if (!response.ok || !response.body) {
                throw new ApiError(`stream responded ${response.status}`, response.status);
            }
            this.handlers.onResync(doc);
            this.handlers.onConnection(true);
            this.backoffMs = BACKOFF_START_MS;
            await this.readFrames(response.body);
        } catch {
            // connection errors are expected while the relay restarts
        }
        this.scheduleRetry();
    }

    private async readFrames(body: ReadableStream<Uint8Array>): Promise<void> {
        const reader = body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        while (!this.stopped) {
            const { done, value } = await reader.read();
            if (done) {
                return;
            }
            buffer += decoder.decode(value, { stream: true });
            let newline;
            while ((newline = buffer.indexOf("\n")) >= 0) {
                const line = buffer.slice(0, newline).trimEnd();
                buffer = buffer.slice(newline + 1);
                if (line.startsWith("data: ")) {
                    this.dispatch(line.slice("data: ".length));
                }
                // blank separators and ":" keepalive comments are skipped
            }
        }
    }

    private dispatch(payload: string): void {
        let frame: PushFrame;
        try {
            frame = JSON.parse(payload) as PushFrame;
        } catch {
            return;
        }
        this.handlers.onFrame(frame);
    }
}
