import { FrameStream } from "./api.js";
import { CockpitController } from "./controller.js";
import type { FontScale, ViewState } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) {
        throw new Error(`missing element #${id}`);
    }
    return node as T;
}

const badge = el<HTMLSpanElement>("state-badge");
const connection = el<HTMLSpanElement>("connection");
const advisory = el<HTMLPreElement>("advisory");
const pager = el<HTMLDivElement>("pager");
const pageLabel = el<HTMLSpanElement>("page-label");
const prevButton = el<HTMLButtonElement>("prev-page");
const nextButton = el<HTMLButtonElement>("next-page");
const banner = el<HTMLDivElement>("error-banner");
const bannerText = el<HTMLSpanElement>("error-text");
const queryButton = el<HTMLButtonElement>("query");
const armButton = el<HTMLButtonElement>("arm");
const submitButton = el<HTMLButtonElement>("submit");
const draft = el<HTMLTextAreaElement>("draft");

const FONT_PX: Record<FontScale, string> = { SMALL: "14px", MEDIUM: "18px", LARGE: "26px" };

function render(view: ViewState): void {
    badge.textContent = view.advisoryState;
    badge.className = `badge badge-${view.advisoryState.toLowerCase()}`;
    connection.textContent = view.connection === "CONNECTED" ? "link ok" : "reconnecting…";
    connection.className = view.connection === "CONNECTED" ? "conn ok" : "conn down";

    advisory.style.fontSize = FONT_PX[view.fontScale];
    advisory.textContent = view.pages[view.currentPage] ?? "";

    const multi = view.pages.length > 1;
    pager.style.visibility = multi ? "visible" : "hidden";
    pageLabel.textContent = multi ? `${view.currentPage + 1} / ${view.pages.length}` : "";
    prevButton.disabled = view.currentPage === 0;
    nextButton.disabled = view.currentPage >= view.pages.length - 1;

    banner.style.display = view.errorBanner ? "flex" : "none";
    bannerText.textContent = view.errorBanner ?? "";

    const busy = controller.busy;
    queryButton.disabled = busy;
    armButton.disabled = busy;
    submitButton.disabled = busy || view.draftText.trim() === "";
    if (draft.value !== view.draftText) {
        draft.value = view.draftText;
    }
}

const controller = new CockpitController("", render);

queryButton.addEventListener("click", () => void controller.query());
armButton.addEventListener("click", () => void controller.arm());
submitButton.addEventListener("click", () => void controller.submitDraft());
draft.addEventListener("input", () => controller.setDraft(draft.value));
draft.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
        event.preventDefault();
        void controller.submitDraft();
    }
});
prevButton.addEventListener("click", () => controller.page(-1));
nextButton.addEventListener("click", () => controller.page(1));
el<HTMLButtonElement>("dismiss-error").addEventListener("click", () => controller.dismissError());

for (const scale of ["SMALL", "MEDIUM", "LARGE"] as FontScale[]) {
    el<HTMLButtonElement>(`font-${scale.toLowerCase()}`).addEventListener("click", () =>
        controller.setFont(scale),
    );
}

const stream = new FrameStream("", {
    onFrame: (frame) => controller.handleFrame(frame),
    onResync: (doc) => controller.handleResync(doc),
    onConnection: (connected) => controller.handleConnection(connected),
});
stream.start();
render(controller.view);
