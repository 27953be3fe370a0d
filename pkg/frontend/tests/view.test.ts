import { describe, expect, it } from "vitest";
import { PAGE_CHARS, applyFrame, initialView, resyncView, setFontScale, turnPage } from "../src/view.js";
import type { PushFrame, ViewState } from "../src/types.js";
import { randomFrameSequence, randomText, rng } from "./helpers.js";

function frame(partial: Partial<PushFrame> & { seq: number }): PushFrame {
    return { kind: "STATE_CHANGED", state: "ACTIVE", ...partial };
}

function pageInvariant(view: ViewState): void {
    if (view.pages.length === 0) {
        expect(view.currentPage).toBe(0);
    } else {
        expect(view.currentPage).toBeGreaterThanOrEqual(0);
        expect(view.currentPage).toBeLessThan(view.pages.length);
    }
}

describe("applyFrame", () => {
    it("starts armed, blank, reconnecting", () => {
        const view = initialView();
        expect(view.advisoryState).toBe("ARMED");
        expect(view.pages).toEqual([]);
        expect(view.connection).toBe("RECONNECTING");
    });

    it("advisory frames repopulate pages at page 0", () => {
        let view = initialView();
        view = applyFrame(view, frame({ seq: 1 }));
        view = applyFrame(view, frame({ kind: "ADVISORY", seq: 2, text: randomText(rng(5), 3000) }));
        expect(view.pages.length).toBeGreaterThan(1);
        view = turnPage(view, 2);
        expect(view.currentPage).toBe(2);
        view = applyFrame(view, frame({ kind: "ADVISORY", seq: 3, text: "descend now" }));
        expect(view.pages).toEqual(["descend now"]);
        expect(view.currentPage).toBe(0);
    });

    it("arming blanks the advisory area", () => {
        let view = initialView();
        view = applyFrame(view, frame({ kind: "ADVISORY", seq: 1, text: "old text" }));
        view = applyFrame(view, frame({ seq: 2, state: "ARMED" }));
        expect(view.pages).toEqual([]);
        expect(view.advisoryText).toBe("");
        expect(view.advisoryState).toBe("ARMED");
    });

    it("error frames raise the banner without touching pages or badge", () => {
        let view = initialView();
        view = applyFrame(view, frame({ kind: "ADVISORY", seq: 1, text: "keep me" }));
        view = applyFrame(view, frame({ kind: "ERROR", seq: 2, state: "ACTIVE", text: "backend down" }));
        expect(view.errorBanner).toBe("backend down");
        expect(view.pages).toEqual(["keep me"]);
        expect(view.advisoryState).toBe("ARMED");
    });

    it("stale frames are dropped unchanged", () => {
        let view = initialView();
        view = applyFrame(view, frame({ seq: 5, state: "ACTIVE" }));
        const before = view;
        view = applyFrame(view, frame({ seq: 5, state: "INTERACTIVE" }));
        view = applyFrame(view, frame({ seq: 3, kind: "ADVISORY", text: "late" }));
        expect(view).toBe(before);
    });
});

describe("resyncView", () => {
    it("replaces badge, pages, and seq from the state document", () => {
        let view = initialView();
        view = applyFrame(view, frame({ seq: 2 }));
        view = resyncView(view, { state: "INTERACTIVE", seq: 40, last_advisory: "hold short" });
        expect(view.advisoryState).toBe("INTERACTIVE");
        expect(view.pages).toEqual(["hold short"]);
        expect(view.lastSeq).toBe(40);
        expect(view.connection).toBe("CONNECTED");
        const replayed = applyFrame(view, frame({ seq: 39, state: "ARMED" }));
        expect(replayed).toBe(view);
    });

    it("handles a document with no advisory", () => {
        const view = resyncView(initialView(), { state: "ARMED", seq: 0 });
        expect(view.pages).toEqual([]);
    });
});

describe("font scale and paging", () => {
    it("re-paginates on scale change and keeps the page index valid", () => {
        let view = initialView();
        const text = randomText(rng(9), 4000);
        view = applyFrame(view, frame({ kind: "ADVISORY", seq: 1, text }));
        view = turnPage(view, 99);
        const lastBefore = view.currentPage;
        expect(lastBefore).toBe(view.pages.length - 1);

        for (const scale of ["SMALL", "LARGE", "MEDIUM"] as const) {
            view = setFontScale(view, scale);
            expect(view.fontScale).toBe(scale);
            for (const page of view.pages) {
                expect(page.length).toBeLessThanOrEqual(PAGE_CHARS[scale]);
            }
            pageInvariant(view);
        }
    });

    it("larger fonts mean smaller pages", () => {
        expect(PAGE_CHARS.SMALL).toBeGreaterThan(PAGE_CHARS.MEDIUM);
        expect(PAGE_CHARS.MEDIUM).toBeGreaterThan(PAGE_CHARS.LARGE);
    });

    it("turnPage clamps at both ends and ignores empty pagers", () => {
        let view = initialView();
        expect(turnPage(view, 1)).toBe(view);
        view = applyFrame(view, frame({ kind: "ADVISORY", seq: 1, text: randomText(rng(2), 3000) }));
        view = turnPage(view, -5);
        expect(view.currentPage).toBe(0);
        view = turnPage(view, 999);
        expect(view.currentPage).toBe(view.pages.length - 1);
    });
});

describe("badge synchronization model", () => {
    it("tracks the last in-order STATE_CHANGED across 1000 random sequences", () => {
        for (let seed = 0; seed < 1000; seed++) {
            const r = rng(20_000 + seed);
            const frames = randomFrameSequence(r, 1 + Math.floor(r() * 40));

            let view = initialView();
            // Independent model of the staleness rule.
            let modelSeq = -1;
            let modelBadge = "ARMED";
            for (const f of frames) {
                view = applyFrame(view, f);
                if (f.seq > modelSeq) {
                    modelSeq = f.seq;
                    if (f.kind === "STATE_CHANGED") {
                        modelBadge = f.state;
                    }
                }
                expect(view.advisoryState).toBe(modelBadge);
                expect(view.lastSeq).toBe(modelSeq);
                pageInvariant(view);
            }
        }
    });
});
