import type { Sentiment } from "./types.js";

/**
 * The service's built-in reaction lexicon, mirrored so the picker can show
 * what each name means before the human commits to it. Channel config
 * overrides take precedence; any unknown name is neutral.
 */
export const DEFAULT_EMOJI_LEXICON: Record<string, Sentiment> = {
  thumbsup: "positive",
  "+1": "positive",
  tada: "positive",
  heart: "positive",
  heart_eyes: "positive",
  star: "positive",
  star_struck: "positive",
  fire: "positive",
  clap: "positive",
  raised_hands: "positive",
  "100": "positive",
  rocket: "positive",
  bulb: "positive",
  partying_face: "positive",
  thumbsdown: "negative",
  "-1": "negative",
  confused: "negative",
  cry: "negative",
  angry: "negative",
  x: "negative",
};

export function classifyReaction(
  emoji: string,
  overrides?: Record<string, string>,
): Sentiment {
  const fromOverride = overrides?.[emoji];
  if (fromOverride === "positive" || fromOverride === "negative" || fromOverride === "neutral") {
    return fromOverride;
  }
  return DEFAULT_EMOJI_LEXICON[emoji] ?? "neutral";
}

/** Names the picker offers: overrides first, then the built-ins not overridden. */
export function pickerEntries(
  overrides?: Record<string, string>,
): { emoji: string; sentiment: Sentiment }[] {
  const seen = new Set<string>();
  const entries: { emoji: string; sentiment: Sentiment }[] = [];
  for (const emoji of Object.keys(overrides ?? {})) {
    seen.add(emoji);
    entries.push({ emoji, sentiment: classifyReaction(emoji, overrides) });
  }
  for (const emoji of Object.keys(DEFAULT_EMOJI_LEXICON)) {
    if (!seen.has(emoji)) entries.push({ emoji, sentiment: DEFAULT_EMOJI_LEXICON[emoji]! });
  }
  return entries;
}
