/**
 * Binary masks and polygon rasterization.
 *
 * This deliberately mirrors the arithmetic of the backend's rasterizer so
 * that what the user sees on the canvas is exactly what the server stores
 * after replaying the submitted contours. Every operation is plain IEEE
 * double math with the same rounding points; there is no tolerance anywhere.
 */

export type Point = [number, number];

export interface ContourOp {
  op: "add" | "subtract";
  contour: Point[];
}

/** Dense 0/1 mask over a width x height pixel grid, row-major. */
export class Mask {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, data?: Uint8Array) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
      throw new Error(`bad mask shape ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.data = data ?? new Uint8Array(width * height);
    if (this.data.length !== width * height) {
      throw new Error("mask buffer does not match shape");
    }
  }

  clone(): Mask {
    return new Mask(this.width, this.height, this.data.slice());
  }

  get(x: number, y: number): boolean {
    return this.data[y * this.width + x] !== 0;
  }

  area(): number {
    let n = 0;
    for (let i = 0; i < this.data.length; i++) n += this.data[i];
    return n;
  }

  isEmpty(): boolean {
    return this.area() === 0;
  }
}

export function masksEqual(a: Mask, b: Mask): boolean {
  if (a.width !== b.width || a.height !== b.height) return false;
  for (let i = 0; i < a.data.length; i++) {
    if (a.data[i] !== b.data[i]) return false;
  }
  return true;
}

/** True when every pixel of `inner` is also set in `outer`. */
export function isSubset(inner: Mask, outer: Mask): boolean {
  if (inner.width !== outer.width || inner.height !== outer.height) return false;
  for (let i = 0; i < inner.data.length; i++) {
    if (inner.data[i] && !outer.data[i]) return false;
  }
  return true;
}

export function union(a: Mask, b: Mask): Mask {
  const out = a.clone();
  for (let i = 0; i < out.data.length; i++) {
    if (b.data[i]) out.data[i] = 1;
  }
  return out;
}

export function intersection(a: Mask, b: Mask): Mask {
  const out = new Mask(a.width, a.height);
  for (let i = 0; i < out.data.length; i++) {
    out.data[i] = a.data[i] && b.data[i] ? 1 : 0;
  }
  return out;
}

/** Pixels of `a` that are not in `b`. */
export function difference(a: Mask, b: Mask): Mask {
  const out = new Mask(a.width, a.height);
  for (let i = 0; i < out.data.length; i++) {
    out.data[i] = a.data[i] && !b.data[i] ? 1 : 0;
  }
  return out;
}

/**
 * Even-odd scanline fill sampled at pixel centers (col + 0.5, row + 0.5).
 *
 * A pixel is inside when a horizontal ray through its center crosses the
 * polygon an odd number of times. Edges are tested half-open so a vertex
 * touching a scanline is counted once. Coordinates may extend past the
 * image; spans are clamped.
 */
export function rasterize(points: Point[], width: number, height: number): Mask {
  const mask = new Mask(width, height);
  const n = points.length;
  if (n < 3) throw new Error("contour needs at least 3 points");

  let minY = Infinity;
  let maxY = -Infinity;
  for (const [, y] of points) {
    if (y < minY) minY = y;
    if (y > maxY) maxY = y;
  }
  const rowLo = Math.max(0, Math.floor(minY - 0.5));
  const rowHi = Math.min(height - 1, Math.ceil(maxY));

  const xs: number[] = [];
  for (let row = rowLo; row <= rowHi; row++) {
    const y = row + 0.5;
    xs.length = 0;
    for (let i = 0; i < n; i++) {
      const [x0, y0] = points[i];
      const [x1, y1] = points[(i + 1) % n];
      if ((y0 > y) !== (y1 > y)) {
        const t = (y - y0) / (y1 - y0);
        xs.push(x0 + t * (x1 - x0));
      }
    }
    if (xs.length === 0) continue;
    xs.sort((a, b) => a - b);
    for (let k = 0; k + 1 < xs.length; k += 2) {
      let first = Math.ceil(xs[k] - 0.5);
      let last = Math.ceil(xs[k + 1] - 0.5) - 1;
      if (first < 0) first = 0;
      if (last > width - 1) last = width - 1;
      for (let col = first; col <= last; col++) {
        mask.data[row * width + col] = 1;
      }
    }
  }
  return mask;
}

/**
 * Replay add/subtract contour operations onto an empty mask, in order.
 * This is the same composition the server applies to a submission.
 */
export function replayOps(ops: ContourOp[], width: number, height: number): Mask {
  let acc = new Mask(width, height);
  for (const step of ops) {
    const shape = rasterize(step.contour, width, height);
    acc = step.op === "add" ? union(acc, shape) : difference(acc, shape);
  }
  return acc;
}

/**
 * Decompose a mask into per-row run rectangles, each expressed as a
 * 4-point contour whose rasterization is exactly that run. Used to
 * re-add protected pixels after a subtract clips into them: integer
 * corners make the round trip through the rasterizer lossless.
 */
export function runRectangles(mask: Mask): Point[][] {
  const rects: Point[][] = [];
  for (let y = 0; y < mask.height; y++) {
    let x = 0;
    while (x < mask.width) {
      if (!mask.data[y * mask.width + x]) {
        x++;
        continue;
      }
      const start = x;
      while (x < mask.width && mask.data[y * mask.width + x]) x++;
      // run covers columns [start, x-1] in row y
      rects.push([
        [start, y],
        [x, y],
        [x, y + 1],
        [start, y + 1],
      ]);
    }
  }
  return rects;
}
