import { describe, expect, it } from "vitest";

import { COLOR_BUCKETS, bucketIndex, colorFor } from "../src/color.js";

describe("five-bucket color ramp", () => {
  it("maps maximum intensity to the darkest bucket", () => {
    expect(colorFor(1.0)).toBe(COLOR_BUCKETS[COLOR_BUCKETS.length - 1]);
  });

  it("maps zero intensity to the lightest bucket", () => {
    expect(colorFor(0.0)).toBe(COLOR_BUCKETS[0]);
  });

  it("is monotone in intensity", () => {
    let previous = -1;
    for (let i = 0; i <= 100; i++) {
      const bucket = bucketIndex(i / 100);
      expect(bucket).toBeGreaterThanOrEqual(previous);
      previous = bucket;
    }
  });

  it("clamps out-of-range values", () => {
    expect(bucketIndex(-0.5)).toBe(0);
    expect(bucketIndex(1.5)).toBe(COLOR_BUCKETS.length - 1);
  });

  it("has exactly five buckets", () => {
    expect(COLOR_BUCKETS).toHaveLength(5);
  });
});
