import { paginate } from "./paginate.js";
import type { FontScale, PushFrame, StateDoc, ViewState } from "./types.js";

// Smaller glyphs leave room for more characters per page.
export const PAGE_CHARS: Record<FontScale, number> = {
    SMALL: 1600,
    MEDIUM: 1200,
    LARGE: 800,
};

export function initialView(): ViewState {
    return {
        advisoryState: "ARMED",
        advisoryText: "",
        pages: [],
        currentPage: 0,
        fontScale: "MEDIUM",
        draftText: "",
        connection: "RECONNECTING",
        errorBanner: null,
        lastSeq: -1,
    };
}

/**
 * Fold one push frame into the view.  Frames whose seq does not advance
 * past the last applied one are stale (reconnect replays, races) and are
 * dropped without effect.  Only STATE_CHANGED moves the badge.
 */
export function applyFrame(view: ViewState, frame: PushFrame): ViewState {
    if (frame.seq <= view.lastSeq) {
        return view;
    }
    const next: ViewState = { ...view, lastSeq: frame.seq };
    switch (frame.kind) {
        case "STATE_CHANGED":
            next.advisoryState = frame.state;
            if (frame.state === "ARMED") {
                // Armed shows a blank advisory area until the next trigger.
                next.advisoryText = "";
                next.pages = [];
                next.currentPage = 0;
            }
            return next;
        case "ADVISORY":
            next.advisoryText = frame.text ?? "";
            next.pages = paginate(next.advisoryText, PAGE_CHARS[view.fontScale]);
            next.currentPage = 0;
            return next;
        case "ERROR":
            next.errorBanner = frame.text ?? "unknown server error";
            return next;
        default:
            return next;
    }
}

/** Re-sync after a reconnect: the state document replaces frame history. */
export function resyncView(view: ViewState, doc: StateDoc): ViewState {
    const text = doc.last_advisory ?? "";
    return {
        ...view,
        advisoryState: doc.state,
        advisoryText: text,
        pages: paginate(text, PAGE_CHARS[view.fontScale]),
        currentPage: 0,
        lastSeq: doc.seq,
        connection: "CONNECTED",
    };
}

export function setFontScale(view: ViewState, scale: FontScale): ViewState {
    const pages = paginate(view.advisoryText, PAGE_CHARS[scale]);
    const currentPage = pages.length === 0 ? 0 : Math.min(view.currentPage, pages.length - 1);
    return { ...view, fontScale: scale, pages, currentPage };
}

export function turnPage(view: ViewState, delta: number): ViewState {
    if (view.pages.length === 0) {
        return view;
    }
    const currentPage = Math.min(Math.max(view.currentPage + delta, 0), view.pages.length - 1);
    return { ...view, currentPage };
}
