import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import {
  Mask,
  Point,
  difference,
  intersection,
  isSubset,
  masksEqual,
  rasterize,
  replayOps,
  runRectangles,
  union,
} from "../src/raster.js";

interface FixtureCase {
  points: Point[];
  pixels: number[];
}

interface Fixture {
  width: number;
  height: number;
  cases: FixtureCase[];
}

const fixture: Fixture = JSON.parse(
  readFileSync(fileURLToPath(new URL("./fixtures/raster-cases.json", import.meta.url)), "utf8"),
);

function onIndices(mask: Mask): number[] {
  const out: number[] = [];
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i]) out.push(i);
  }
  return out;
}

describe("rasterize", () => {
  it("fills an axis-aligned square over exactly its interior pixel centers", () => {
    const mask = rasterize(
      [
        [0, 0],
        [4, 0],
        [4, 4],
        [0, 4],
      ],
      8,
      8,
    );
    expect(mask.area()).toBe(16);
    for (let y = 0; y < 4; y++) {
      for (let x = 0; x < 4; x++) {
        expect(mask.get(x, y)).toBe(true);
      }
    }
  });

  it("uses even-odd fill for a self-intersecting bowtie", () => {
    const mask = rasterize(
      [
        [0, 0],
        [8, 8],
        [8, 0],
        [0, 8],
      ],
      8,
      8,
    );
    expect(mask.get(4, 1)).toBe(false); // between the lobes
    expect(mask.get(1, 4)).toBe(true);
    expect(mask.get(6, 4)).toBe(true);
  });

  it("clamps polygons that extend past the grid", () => {
    const mask = rasterize(
      [
        [-10, -10],
        [20, -10],
        [20, 20],
        [-10, 20],
      ],
      8,
      8,
    );
    expect(mask.area()).toBe(64);
  });

  it("rejects contours with fewer than 3 points", () => {
    expect(() => rasterize([[0, 0], [1, 1]] as Point[], 8, 8)).toThrow();
  });

  // The backend replays submitted contours with the same scanline rule,
  // so these pixel sets are pinned to its output and must match exactly.
  it("matches the recorded pixel sets for every fixture polygon", () => {
    for (const c of fixture.cases) {
      const mask = rasterize(c.points, fixture.width, fixture.height);
      expect(onIndices(mask)).toEqual(c.pixels);
    }
  });
});

describe("mask algebra", () => {
  const square = (x0: number, y0: number, side: number): Mask =>
    rasterize(
      [
        [x0, y0],
        [x0 + side, y0],
        [x0 + side, y0 + side],
        [x0, y0 + side],
      ],
      16,
      16,
    );

  it("union, intersection, and difference behave setwise", () => {
    const a = square(0, 0, 6);
    const b = square(3, 3, 6);
    expect(union(a, b).area()).toBe(36 + 36 - 9);
    expect(intersection(a, b).area()).toBe(9);
    expect(difference(a, b).area()).toBe(27);
    expect(isSubset(intersection(a, b), a)).toBe(true);
    expect(isSubset(a, union(a, b))).toBe(true);
  });

  it("replayOps composes add and subtract in order", () => {
    const mask = replayOps(
      [
        { op: "add", contour: [[0, 0], [8, 0], [8, 8], [0, 8]] },
        { op: "subtract", contour: [[2, 2], [6, 2], [6, 6], [2, 6]] },
        { op: "add", contour: [[3, 3], [5, 3], [5, 5], [3, 5]] },
      ],
      16,
      16,
    );
    expect(mask.area()).toBe(64 - 16 + 4);
    expect(mask.get(0, 0)).toBe(true);
    expect(mask.get(2, 2)).toBe(false);
    expect(mask.get(3, 3)).toBe(true);
  });
});

describe("runRectangles", () => {
  it("round-trips any mask through rasterization exactly", () => {
    // a scattered mask with holes and multiple runs per row
    const mask = new Mask(16, 16);
    const rng = mulberry32(7);
    for (let i = 0; i < mask.data.length; i++) {
      mask.data[i] = rng() < 0.4 ? 1 : 0;
    }
    const rects = runRectangles(mask);
    let rebuilt = new Mask(16, 16);
    for (const rect of rects) {
      rebuilt = union(rebuilt, rasterize(rect, 16, 16));
    }
    expect(masksEqual(rebuilt, mask)).toBe(true);
  });

  it("produces one rectangle per horizontal run", () => {
    const mask = new Mask(8, 8);
    mask.data[0] = 1;
    mask.data[1] = 1;
    mask.data[3] = 1; // row 0: runs [0,1] and [3,3]
    mask.data[8] = 1; // row 1: run [0,0]
    expect(runRectangles(mask)).toEqual([
      [[0, 0], [2, 0], [2, 1], [0, 1]],
      [[3, 0], [4, 0], [4, 1], [3, 1]],
      [[0, 1], [1, 1], [1, 2], [0, 2]],
    ]);
  });
});

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
