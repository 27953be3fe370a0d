export type AdvisoryState = "ARMED" | "ACTIVE" | "INTERACTIVE";

export type FrameKind = "STATE_CHANGED" | "ADVISORY" | "ERROR";

export interface PushFrame {
    kind: FrameKind;
    state: AdvisoryState;
    seq: number;
    text?: string;
}

export interface StateDoc {
    state: AdvisoryState;
    seq: number;
    last_advisory?: string;
}

export type FontScale = "SMALL" | "MEDIUM" | "LARGE";

export type Connection = "CONNECTED" | "RECONNECTING";

export interface ViewState {
    advisoryState: AdvisoryState;
    advisoryText: string;
    pages: string[];
    currentPage: number;
    fontScale: FontScale;
    draftText: string;
    connection: Connection;
    errorBanner: string | null;
    lastSeq: number;
}

export type EventKind = "query" | "arm" | "submit";
