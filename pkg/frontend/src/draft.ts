/**
 * In-progress annotation for one task.
 *
 * A draft moves through phases: a singular task stays in "drawing-singular";
 * a confidence-contour task starts in "drawing-min" and reaches "drawing-max"
 * only through copyMinToMax, which seeds the max layer from min and locks
 * min against further edits. Subtracting in drawing-max clips against the
 * min layer, so the containment invariant cannot be broken from the UI.
 */

import {
  ContourOp,
  Mask,
  Point,
  difference,
  intersection,
  rasterize,
  runRectangles,
  union,
} from "./raster.js";
import { SnapshotHistory } from "./history.js";

export type Method = "singular" | "cc";
export type Phase = "drawing-singular" | "drawing-min" | "drawing-max";

export type EditResult = { ok: true } | { ok: false; reason: string };

export interface SubmissionBody {
  session_id: string;
  task_id: string;
  method: Method;
  client_duration_ms: number;
  edit_ops: number;
  contours?: ContourOp[];
  min?: ContourOp[];
  max?: ContourOp[];
}

interface Layer {
  ops: ContourOp[];
  raster: Mask;
}

interface Snapshot {
  phase: Phase;
  base: Layer;
  max: Layer | null;
}

function cloneLayer(layer: Layer): Layer {
  return {
    ops: layer.ops.map((step) => ({
      op: step.op,
      contour: step.contour.map((p) => [p[0], p[1]] as Point),
    })),
    raster: layer.raster.clone(),
  };
}

/** Reject contours the server would bounce, before they touch the draft. */
export function validateContour(points: Point[]): EditResult {
  if (points.length < 3) {
    return { ok: false, reason: "a contour needs at least 3 points" };
  }
  for (const [x, y] of points) {
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      return { ok: false, reason: "contour coordinates must be finite numbers" };
    }
  }
  for (let i = 0; i < points.length; i++) {
    const [x0, y0] = points[i];
    const [x1, y1] = points[(i + 1) % points.length];
    if (x0 === x1 && y0 === y1) {
      return { ok: false, reason: "contour repeats a point" };
    }
  }
  return { ok: true };
}

export class DraftAnnotation {
  readonly method: Method;
  readonly width: number;
  readonly height: number;

  private phase_: Phase;
  private base: Layer;
  private max: Layer | null = null;
  private editOps = 0;

  private readonly clock: () => number;
  private readonly startedAt: number;
  private phaseStartedAt: number;
  private phaseElapsed: Map<Phase, number> = new Map();

  private history: SnapshotHistory<Snapshot>;

  constructor(method: Method, width: number, height: number, clock: () => number = () => Date.now()) {
    this.method = method;
    this.width = width;
    this.height = height;
    this.phase_ = method === "singular" ? "drawing-singular" : "drawing-min";
    this.base = { ops: [], raster: new Mask(width, height) };
    this.clock = clock;
    this.startedAt = clock();
    this.phaseStartedAt = this.startedAt;
    this.history = new SnapshotHistory(
      () => this.captureSnapshot(),
      (snap) => this.restoreSnapshot(snap),
    );
  }

  get phase(): Phase {
    return this.phase_;
  }

  get editOpCount(): number {
    return this.editOps;
  }

  get canUndo(): boolean {
    return this.history.canUndo;
  }

  get canRedo(): boolean {
    return this.history.canRedo;
  }

  /** The mask being edited right now. */
  activeRaster(): Mask {
    return this.activeLayer().raster.clone();
  }

  /** Singular contours or the cc min layer. */
  baseRaster(): Mask {
    return this.base.raster.clone();
  }

  /** The cc max layer; null until copyMinToMax has run. */
  maxRaster(): Mask | null {
    return this.max ? this.max.raster.clone() : null;
  }

  get minLocked(): boolean {
    return this.max !== null;
  }

  canCopyMinToMax(): boolean {
    return this.phase_ === "drawing-min" && !this.base.raster.isEmpty();
  }

  /**
   * A draft is submittable once the method's structure is complete:
   * at least one committed contour for singular, both layers for cc.
   */
  canSubmit(): boolean {
    if (this.method === "singular") {
      return this.base.ops.length > 0;
    }
    return this.phase_ === "drawing-max";
  }

  addContour(points: Point[]): EditResult {
    const check = validateContour(points);
    if (!check.ok) return check;
    this.history.mark();
    const layer = this.activeLayer();
    const shape = rasterize(points, this.width, this.height);
    layer.ops.push({ op: "add", contour: points.map((p) => [p[0], p[1]]) });
    layer.raster = union(layer.raster, shape);
    this.editOps++;
    return { ok: true };
  }

  subtractContour(points: Point[]): EditResult {
    const check = validateContour(points);
    if (!check.ok) return check;
    this.history.mark();
    const layer = this.activeLayer();
    const shape = rasterize(points, this.width, this.height);
    const contour: Point[] = points.map((p) => [p[0], p[1]]);
    if (this.phase_ === "drawing-max") {
      // Clip against min: the subtract goes on the wire as drawn, followed
      // by run rectangles that re-add the protected pixels, so a literal
      // replay of the op list lands on exactly this raster.
      const protectedPixels = intersection(this.base.raster, shape);
      layer.ops.push({ op: "subtract", contour });
      for (const rect of runRectangles(protectedPixels)) {
        layer.ops.push({ op: "add", contour: rect });
      }
      layer.raster = union(difference(layer.raster, shape), protectedPixels);
    } else {
      layer.ops.push({ op: "subtract", contour });
      layer.raster = difference(layer.raster, shape);
    }
    this.editOps++;
    return { ok: true };
  }

  /** Seed the max layer from min and lock min. Only valid from drawing-min. */
  copyMinToMax(): EditResult {
    if (this.method !== "cc") {
      return { ok: false, reason: "only confidence-contour drafts have a max layer" };
    }
    if (this.phase_ !== "drawing-min") {
      return { ok: false, reason: "min has already been copied" };
    }
    if (this.base.raster.isEmpty()) {
      return { ok: false, reason: "draw the min contour before copying it to max" };
    }
    this.history.mark();
    this.max = cloneLayer(this.base);
    this.setPhase("drawing-max");
    this.editOps++;
    return { ok: true };
  }

  undo(): boolean {
    if (!this.history.undo()) return false;
    this.editOps++;
    return true;
  }

  redo(): boolean {
    if (!this.history.redo()) return false;
    this.editOps++;
    return true;
  }

  /**
   * Milliseconds spent in each phase so far. Entries only grow, and their
   * sum is exactly the elapsed time since the draft was created.
   */
  timerBreakdown(): { phase: Phase; ms: number }[] {
    this.accrue();
    const out: { phase: Phase; ms: number }[] = [];
    for (const [phase, ms] of this.phaseElapsed) {
      out.push({ phase, ms });
    }
    return out;
  }

  elapsedMs(): number {
    return this.clock() - this.startedAt;
  }

  payload(sessionId: string, taskId: string): SubmissionBody {
    const body: SubmissionBody = {
      session_id: sessionId,
      task_id: taskId,
      method: this.method,
      client_duration_ms: Math.max(0, Math.round(this.elapsedMs())),
      edit_ops: this.editOps,
    };
    if (this.method === "singular") {
      body.contours = cloneLayer(this.base).ops;
    } else {
      if (this.max === null) {
        throw new Error("cc draft is not complete: min has not been copied to max");
      }
      body.min = cloneLayer(this.base).ops;
      body.max = cloneLayer(this.max).ops;
    }
    return body;
  }

  private activeLayer(): Layer {
    if (this.phase_ === "drawing-max") {
      if (this.max === null) throw new Error("max layer missing in drawing-max");
      return this.max;
    }
    return this.base;
  }

  private setPhase(phase: Phase): void {
    if (phase === this.phase_) return;
    this.accrue();
    this.phase_ = phase;
  }

  private accrue(): void {
    const now = this.clock();
    const prev = this.phaseElapsed.get(this.phase_) ?? 0;
    this.phaseElapsed.set(this.phase_, prev + (now - this.phaseStartedAt));
    this.phaseStartedAt = now;
  }

  private captureSnapshot(): Snapshot {
    return {
      phase: this.phase_,
      base: cloneLayer(this.base),
      max: this.max ? cloneLayer(this.max) : null,
    };
  }

  private restoreSnapshot(snap: Snapshot): void {
    this.setPhase(snap.phase);
    this.base = cloneLayer(snap.base);
    this.max = snap.max ? cloneLayer(snap.max) : null;
  }
}
