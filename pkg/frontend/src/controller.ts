import { ApiError, sendEvent } from "./api.js";
import { applyFrame, initialView, resyncView, setFontScale, turnPage } from "./view.js";
import type { FontScale, PushFrame, StateDoc, ViewState } from "./types.js";

type FetchFn = typeof fetch;

/**
 * Headless view-model.  Owns the single ViewState, serializes user actions
 * (at most one event awaits acknowledgment at a time), and notifies the
 * renderer after every change.
 */
export class CockpitController {
    view: ViewState = initialView();
    private pending = false;

    constructor(
        private readonly baseUrl: string,
        private readonly onChange: (view: ViewState) => void = () => {},
        private readonly fetchFn: FetchFn = fetch,
    ) {}

    get busy(): boolean {
        return this.pending;
    }

    private update(view: ViewState): void {
        this.view = view;
        this.onChange(view);
    }

    handleFrame(frame: PushFrame): void {
        this.update(applyFrame(this.view, frame));
    }

    handleResync(doc: StateDoc): void {
        this.update(resyncView(this.view, doc));
    }

    handleConnection(connected: boolean): void {
        this.update({ ...this.view, connection: connected ? "CONNECTED" : "RECONNECTING" });
    }

    setDraft(text: string): void {
        this.update({ ...this.view, draftText: text });
    }

    setFont(scale: FontScale): void {
        this.update(setFontScale(this.view, scale));
    }

    page(delta: number): void {
        this.update(turnPage(this.view, delta));
    }

    dismissError(): void {
        this.update({ ...this.view, errorBanner: null });
    }

    async query(): Promise<boolean> {
        return this.send("query");
    }

    async arm(): Promise<boolean> {
        return this.send("arm");
    }

    async submitDraft(): Promise<boolean> {
        const draft = this.view.draftText.trim();
        if (!draft) {
            return false;
        }
        const ok = await this.send("submit", draft);
        if (ok) {
            // Draft survives failures so the pilot can retry without retyping.
            this.update({ ...this.view, draftText: "" });
        }
        return ok;
    }

    private async send(kind: "query" | "arm" | "submit", text?: string): Promise<boolean> {
        if (this.pending) {
            return false;
        }
        this.pending = true;
        this.onChange(this.view);
        try {
            await sendEvent(this.baseUrl, kind, text, this.fetchFn);
            return true;
        } catch (err) {
            const message = err instanceof ApiError ? err.message : String(err);
            this.update({ ...this.view, errorBanner: message });
            return false;
        } finally {
            this.pending = false;
            this.onChange(this.view);
        }
    }
}
