import type { Frequency } from "./types.js";

export const INTERVAL_HOURS: Record<Frequency, number> = {
  daily: 24,
  every_other_day: 48,
  weekly: 168,
};

/**
 * When the next scheduled bot post is due, mirroring the service rule: last
 * bot post time plus the frequency interval, or "due now" when the channel
 * has no bot post yet. Display-only — the service owns the real schedule.
 */
export function nextPostDue(
  frequency: Frequency,
  lastBotPostTs: string | null,
  now: Date,
): Date {
  if (lastBotPostTs === null) return now;
  const last = new Date(lastBotPostTs);
  return new Date(last.getTime() + INTERVAL_HOURS[frequency] * 3600_000);
}

export function describeDue(due: Date, now: Date): string {
  const deltaMs = due.getTime() - now.getTime();
  if (deltaMs <= 0) return "due now";
  const hours = Math.ceil(deltaMs / 3600_000);
  if (hours < 24) return `due in ${hours}h`;
  const days = Math.floor(hours / 24);
  const rest = hours % 24;
  return rest === 0 ? `due in ${days}d` : `due in ${days}d ${rest}h`;
}
