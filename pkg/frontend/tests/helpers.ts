import type { AdvisoryState, PushFrame } from "../src/types.js";

/** Deterministic PRNG (mulberry32) so failures reproduce from the seed. */
export function rng(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a = (a + 0x6d2b79f5) >>> 0;
        let t = a;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

const VOCAB = [
    "hydraulic", "pressure", "descend", "maintain", "runway", "alternate",
    "fuel", "crossfeed", "checklist", "approach", "advisory", "system",
];

/** Space-separated words padded to exactly the requested length. */
export function randomText(r: () => number, length: number): string {
    let text = "";
    while (text.length < length) {
        const word = VOCAB[Math.floor(r() * VOCAB.length)] as string;
        text += text ? " " + word : word;
    }
    if (text.length > length) {
        text = text.slice(0, length);
        // a trailing cut can leave a dangling separator
        text = text.trimEnd();
        while (text.length < length) {
            text += "x";
        }
    }
    return text;
}

const STATES: AdvisoryState[] = ["ARMED", "ACTIVE", "INTERACTIVE"];

export function randomFrameSequence(r: () => number, length: number): PushFrame[] {
    const frames: PushFrame[] = [];
    let seq = 0;
    for (let i = 0; i < length; i++) {
        const kindRoll = r();
        const kind = kindRoll < 0.45 ? "STATE_CHANGED" : kindRoll < 0.8 ? "ADVISORY" : "ERROR";
        const state = STATES[Math.floor(r() * STATES.length)] as AdvisoryState;
        // Mostly in-order frames with occasional stale/duplicate seq numbers.
        if (r() < 0.75) {
            seq += 1 + Math.floor(r() * 3);
        }
        const stale = r() < 0.15;
        const frame: PushFrame = {
            kind,
            state,
            seq: stale ? Math.max(0, seq - 1 - Math.floor(r() * 5)) : seq,
        };
        if (kind !== "STATE_CHANGED") {
            frame.text = `${kind.toLowerCase()} ${i}`;
        }
        frames.push(frame);
    }
    return frames;
}
