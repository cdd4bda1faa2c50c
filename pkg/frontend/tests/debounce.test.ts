import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { DEBOUNCE_MS, debounce } from "../src/debounce.js";

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("collapses rapid calls into one trailing invocation", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 150);
    d(1);
    vi.advanceTimersByTime(50);
    d(2);
    vi.advanceTimersByTime(149);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual([2]);
  });

  it("fires again for a later burst", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 150);
    d(1);
    vi.advanceTimersByTime(150);
    d(2);
    d(3);
    vi.advanceTimersByTime(150);
    expect(calls).toEqual([1, 3]);
  });

  it("cancel drops the pending call", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 150);
    d(1);
    d.cancel();
    vi.advanceTimersByTime(500);
    expect(calls).toEqual([]);
    expect(d.pending()).toBe(false);
  });

  it("flush runs the pending call immediately", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 150);
    d(7);
    d.flush();
    expect(calls).toEqual([7]);
    vi.advanceTimersByTime(500);
    expect(calls).toEqual([7]);
  });

  it("default interval is 150 ms", () => {
    expect(DEBOUNCE_MS).toBe(150);
  });
});
