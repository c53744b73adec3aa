import { describe, expect, it } from 'vitest';

import { configHash, mulberry32, seededShuffle } from '../src/util';

describe('seeded helpers', () => {
  it('generates a stable stream per seed', () => {
    const a = mulberry32(99);
    const b = mulberry32(99);
    for (let i = 0; i < 100; i++) {
      const v = a();
      expect(v).toBe(b());
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThan(1);
    }
  });

  it('shuffles into a deterministic permutation', () => {
    const items = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
    const once = seededShuffle(items, 7);
    const twice = seededShuffle(items, 7);
    expect(once).toEqual(twice);
    expect([...once].sort((x, y) => x - y)).toEqual(items);
    expect(seededShuffle(items, 8)).not.toEqual(once);
    // input untouched
    expect(items).toEqual([0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
  });

  it('hashes configs independent of key order', () => {
    const a = configHash({ x: 1, y: { b: 2, a: 3 } });
    const b = configHash({ y: { a: 3, b: 2 }, x: 1 });
    expect(a).toBe(b);
    expect(a).toMatch(/^[0-9a-f]{12}$/);
    expect(configHash({ x: 2 })).not.toBe(a);
  });
});
