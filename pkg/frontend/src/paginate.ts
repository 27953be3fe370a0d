/**
 * Split advisory text into pages of at most charsPerPage characters,
 * breaking only between words.  A word wider than a whole page is the one
 * exception: it is hard-split so no page ever exceeds the limit.
 */
export function paginate(text: string, charsPerPage: number): string[] {
    if (charsPerPage <= 0) {
        throw new Error(`charsPerPage must be positive, got ${charsPerPage}`);
    }
    const words = text.split(/\s+/).filter((w) => w.length > 0);
    if (words.length === 0) {
        return [];
    }

    const pages: string[] = [];
    let current = "";
    for (let word of words) {
        while (word.length > charsPerPage) {
            if (current) {
                pages.push(current);
                current = "";
            }
            pages.push(word.slice(0, charsPerPage));
            word = word.slice(charsPerPage);
        }
        if (word.length === 0) {
            continue;
        }
        if (!current) {
            current = word;
        } else if (current.length + 1 + word.length <= charsPerPage) {
            current += " " + word;
        } else {
            pages.push(current);
            current = word;
        }
    }
    if (current) {
        pages.push(current);
    }
    return pages;
}
