/**
 * The bot message markup dialect, mirrored from the service side:
 *
 * - bold spans delimited by single asterisks: `*key phrase*`
 * - member mentions: `<@member_id>`
 * - links with display text: `<scheme://target|Display Title>`
 *
 * Bold detection runs over the body with link tokens resolved to their
 * display titles, so a title containing `*` cannot masquerade as a bold
 * marker. The tokenizer below reproduces that order of operations.
 */

export const MENTION_RE = /<@([A-Za-z0-9_.\-]+)>/g;
export const LINK_RE = /<([a-z][a-z0-9+.\-]*:\/\/[^|>\s]+)\|([^>]+)>/g;
export const BOLD_RE = /\*([^*\n]+)\*/g;

export type MarkupToken =
  | { kind: "text"; text: string; bold: boolean }
  | { kind: "mention"; memberId: string; bold: boolean }
  | { kind: "link"; url: string; title: string; bold: boolean };

type Atom =
  | { kind: "text"; text: string }
  | { kind: "mention"; memberId: string; raw: string }
  | { kind: "link"; url: string; title: string };

function atomize(body: string): Atom[] {
  const atoms: Atom[] = [];
  let index = 0;
  while (index < body.length) {
    const open = body.indexOf("<", index);
    if (open === -1) {
      atoms.push({ kind: "text", text: body.slice(index) });
      break;
    }
    MENTION_RE.lastIndex = open;
    LINK_RE.lastIndex = open;
    const mention = MENTION_RE.exec(body);
    const link = LINK_RE.exec(body);
    const mentionHere = mention !== null && mention.index === open;
    const linkHere = link !== null && link.index === open;
    if (!mentionHere && !linkHere) {
      // a bare '<' that opens no token; emit it and move on
      atoms.push({ kind: "text", text: body.slice(index, open + 1) });
      index = open + 1;
      continue;
    }
    if (open > index) {
      atoms.push({ kind: "text", text: body.slice(index, open) });
    }
    if (mentionHere) {
      atoms.push({ kind: "mention", memberId: mention[1]!, raw: mention[0] });
      index = open + mention[0].length;
    } else if (link) {
      atoms.push({ kind: "link", url: link[1]!, title: link[2]! });
      index = open + link[0].length;
    }
  }
  return atoms;
}

/** The body with link tokens projected to their titles (bold scan domain). */
function resolveLinks(atoms: Atom[]): { resolved: string; spans: [number, number][] } {
  let resolved = "";
  const spans: [number, number][] = [];
  for (const atom of atoms) {
    const start = resolved.length;
    if (atom.kind === "text") resolved += atom.text;
    else if (atom.kind === "mention") resolved += atom.raw;
    else resolved += atom.title;
    spans.push([start, resolved.length]);
  }
  return { resolved, spans };
}

/**
 * Tokenize a message body into a flat stream with a bold flag per token.
 * Token counts are one-to-one with the wire markup: every mention token,
 * every link token, and every bold span in the body shows up exactly once.
 */
export function tokenize(body: string): MarkupToken[] {
  const atoms = atomize(body);
  const { resolved, spans } = resolveLinks(atoms);

  // bold interiors plus the exact positions of the marker asterisks — a stray
  // unpaired '*' is ordinary text and must survive
  const boldRegions: [number, number][] = [];
  const markers = new Set<number>();
  BOLD_RE.lastIndex = 0;
  for (let m = BOLD_RE.exec(resolved); m !== null; m = BOLD_RE.exec(resolved)) {
    const open = m.index;
    const close = m.index + m[0].length - 1;
    boldRegions.push([open + 1, close]);
    markers.add(open);
    markers.add(close);
  }

  const isBoldAt = (start: number, end: number): boolean =>
    boldRegions.some(([b, e]) => start >= b && end <= e);

  const tokens: MarkupToken[] = [];
  const flushText = (text: string, bold: boolean) => {
    if (!text) return;
    const last = tokens[tokens.length - 1];
    if (last && last.kind === "text" && last.bold === bold) {
      last.text += text;
    } else {
      tokens.push({ kind: "text", text, bold });
    }
  };

  atoms.forEach((atom, i) => {
    const [start, end] = spans[i]!;
    if (atom.kind === "mention") {
      tokens.push({ kind: "mention", memberId: atom.memberId, bold: isBoldAt(start, end) });
      return;
    }
    if (atom.kind === "link") {
      tokens.push({
        kind: "link",
        url: atom.url,
        title: atom.title,
        bold: isBoldAt(start, end),
      });
      return;
    }
    let run = "";
    let runBold = false;
    for (let g = start; g < end; g += 1) {
      if (markers.has(g)) continue; // markup, not text
      const bold = isBoldAt(g, g + 1);
      if (bold !== runBold) {
        flushText(run, runBold);
        run = "";
        runBold = bold;
      }
      run += resolved[g]!;
    }
    flushText(run, runBold);
  });
  return tokens;
}

/** Bold span contents, matching the service-side accounting. */
export function boldSpans(body: string): string[] {
  const { resolved } = resolveLinks(atomize(body));
  const out: string[] = [];
  BOLD_RE.lastIndex = 0;
  for (let m = BOLD_RE.exec(resolved); m !== null; m = BOLD_RE.exec(resolved)) {
    out.push(m[1]!);
  }
  return out;
}

export function mentionedIds(body: string): string[] {
  const out: string[] = [];
  MENTION_RE.lastIndex = 0;
  for (let m = MENTION_RE.exec(body); m !== null; m = MENTION_RE.exec(body)) {
    out.push(m[1]!);
  }
  return out;
}

export function linkTokens(body: string): [string, string][] {
  const out: [string, string][] = [];
  LINK_RE.lastIndex = 0;
  for (let m = LINK_RE.exec(body); m !== null; m = LINK_RE.exec(body)) {
    out.push([m[1]!, m[2]!]);
  }
  return out;
}

/** Reader-visible projection: mentions become @names, links their titles. */
export function plainText(body: string, displayNames?: Map<string, string>): string {
  return tokenize(body)
    .map((token) => {
      if (token.kind === "mention") {
        return "@" + (displayNames?.get(token.memberId) ?? token.memberId);
      }
      if (token.kind === "link") return token.title;
      return token.text;
    })
    .join("");
}
