/** Five-bucket single-hue ramp: darker means denser traffic. */

export const COLOR_BUCKETS = [
  "#eff6ff", // lightest: no traffic
  "#bfdbfe",
  "#60a5fa",
  "#2563eb",
  "#1e3a8a", // darkest: maximum traffic
] as const;

export function bucketIndex(intensity: number): number {
  const clamped = Math.min(1, Math.max(0, intensity));
  return Math.min(COLOR_BUCKETS.length - 1, Math.floor(clamped * COLOR_BUCKETS.length));
}

export function colorFor(intensity: number): string {
  return COLOR_BUCKETS[bucketIndex(intensity)] as string;
}
