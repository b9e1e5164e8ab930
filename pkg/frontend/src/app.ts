/**
 * Browser entry point: wires the draft state machine and the API client
 * to a canvas. Clicks build a polygon, double-click closes it and commits
 * it to the draft with the selected tool, and the server stays the
 * authority on validation; its rejections are shown without clearing
 * anything the annotator has drawn.
 */

import { ApiClient, ApiError, SurveyScores, TaskDoc } from "./api.js";
import { DraftAnnotation, SubmissionBody } from "./draft.js";
import { Mask, Point } from "./raster.js";

const SURVEY_FIELDS: (keyof SurveyScores)[] = [
  "mental_demand",
  "physical_demand",
  "temporal_demand",
  "performance",
  "effort",
  "frustration",
];

const ZOOM = 4;

interface Elements {
  banner: HTMLDivElement;
  startPanel: HTMLDivElement;
  taskPanel: HTMLDivElement;
  surveyPanel: HTMLDivElement;
  donePanel: HTMLDivElement;
  annotatorId: HTMLInputElement;
  datasetId: HTMLInputElement;
  startBtn: HTMLButtonElement;
  status: HTMLDivElement;
  canvas: HTMLCanvasElement;
  undoBtn: HTMLButtonElement;
  redoBtn: HTMLButtonElement;
  copyBtn: HTMLButtonElement;
  submitBtn: HTMLButtonElement;
  retryBtn: HTMLButtonElement;
  surveyTitle: HTMLHeadingElement;
  surveyRows: HTMLDivElement;
  surveyBtn: HTMLButtonElement;
}

function grab(): Elements {
  const byId = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
  return {
    banner: byId("banner"),
    startPanel: byId("start-panel"),
    taskPanel: byId("task-panel"),
    surveyPanel: byId("survey-panel"),
    donePanel: byId("done-panel"),
    annotatorId: byId("annotator-id"),
    datasetId: byId("dataset-id"),
    startBtn: byId("start-btn"),
    status: byId("status"),
    canvas: byId("image-canvas"),
    undoBtn: byId("undo-btn"),
    redoBtn: byId("redo-btn"),
    copyBtn: byId("copy-btn"),
    submitBtn: byId("submit-btn"),
    retryBtn: byId("retry-btn"),
    surveyTitle: byId("survey-title"),
    surveyRows: byId("survey-rows"),
    surveyBtn: byId("survey-btn"),
  };
}

class AnnotatorApp {
  private api = new ApiClient("");
  private el: Elements;
  private sessionId = "";
  private task: TaskDoc | null = null;
  private draft: DraftAnnotation | null = null;
  private image: HTMLImageElement | null = null;
  private pending: Point[] = [];
  private submitting = false;
  private failedBody: SubmissionBody | null = null;
  private surveyMethod: "singular" | "cc" | null = null;
  private lastMethod: "singular" | "cc" | null = null;

  constructor() {
    this.el = grab();
    this.el.startBtn.addEventListener("click", () => void this.start());
    this.el.canvas.addEventListener("click", (e) => this.onClick(e));
    this.el.canvas.addEventListener("dblclick", (e) => {
      e.preventDefault();
      this.closeContour();
    });
    window.addEventListener("keydown", (e) => {
      if (e.key === "Escape") {
        this.pending = [];
        this.render();
      }
      if (e.key === "Enter") this.closeContour();
    });
    this.el.undoBtn.addEventListener("click", () => {
      this.draft?.undo();
      this.render();
    });
    this.el.redoBtn.addEventListener("click", () => {
      this.draft?.redo();
      this.render();
    });
    this.el.copyBtn.addEventListener("click", () => {
      if (!this.draft) return;
      const result = this.draft.copyMinToMax();
      if (!result.ok) this.showBanner(result.reason, "error");
      this.render();
    });
    this.el.submitBtn.addEventListener("click", () => void this.submit());
    this.el.retryBtn.addEventListener("click", () => void this.retry());
    this.el.surveyBtn.addEventListener("click", () => void this.sendSurvey());
    this.buildSurveyRows();
  }

  private async start(): Promise<void> {
    const annotator = this.el.annotatorId.value.trim();
    const dataset = this.el.datasetId.value.trim();
    if (!annotator || !dataset) {
      this.showBanner("annotator and dataset are both required", "error");
      return;
    }
    try {
      const info = await this.api.createSession(annotator, dataset);
      this.sessionId = info.session_id;
      this.el.startPanel.style.display = "none";
      this.showBanner(`session ${info.session_id}: ${info.task_count} tasks`, "info");
      await this.advance();
    } catch (err) {
      this.showBanner(describe(err), "error");
    }
  }

  private async advance(): Promise<void> {
    const next = await this.api.nextTask(this.sessionId);
    const previous = this.lastMethod;
    if (next.done || (previous && next.task && next.task.method !== previous)) {
      if (previous) {
        // method block finished; collect the workload survey before moving on
        this.surveyMethod = previous;
        this.lastMethod = null;
        this.el.taskPanel.style.display = "none";
        this.el.surveyTitle.textContent = `Workload survey: ${previous} method`;
        this.el.surveyPanel.style.display = "block";
        this.pendingNext = next;
        return;
      }
    }
    this.presentTask(next.task);
  }

  private pendingNext: { done: boolean; task: TaskDoc | null } | null = null;

  private presentTask(task: TaskDoc | null): void {
    this.el.surveyPanel.style.display = "none";
    if (task === null) {
      this.el.taskPanel.style.display = "none";
      this.el.donePanel.style.display = "block";
      return;
    }
    this.task = task;
    this.lastMethod = task.method;
    this.draft = new DraftAnnotation(task.method, task.width, task.height);
    this.pending = [];
    this.failedBody = null;
    this.el.canvas.width = task.width * ZOOM;
    this.el.canvas.height = task.height * ZOOM;
    this.el.taskPanel.style.display = "block";
    this.image = new Image();
    this.image.onload = () => this.render();
    this.image.src = this.api.imageUrl(task);
    this.render();
  }

  private onClick(e: MouseEvent): void {
    if (!this.draft || !this.task) return;
    const rect = this.el.canvas.getBoundingClientRect();
    const x = ((e.clientX - rect.left) / rect.width) * this.task.width;
    const y = ((e.clientY - rect.top) / rect.height) * this.task.height;
    this.pending.push([x, y]);
    this.render();
  }

  private closeContour(): void {
    if (!this.draft || this.pending.length === 0) return;
    const tool = (document.querySelector('input[name="tool"]:checked') as HTMLInputElement).value;
    const points = this.pending;
    const result =
      tool === "subtract" ? this.draft.subtractContour(points) : this.draft.addContour(points);
    if (!result.ok) {
      // the half-drawn polygon stays on screen so it can be extended
      this.showBanner(result.reason, "error");
      this.render();
      return;
    }
    this.pending = [];
    this.hideBanner();
    this.render();
  }

  private async submit(): Promise<void> {
    if (!this.draft || !this.task || this.submitting) return;
    if (!this.draft.canSubmit()) {
      this.showBanner(
        this.draft.method === "cc"
          ? "copy min to max before submitting"
          : "draw at least one contour first",
        "error",
      );
      return;
    }
    const body = this.draft.payload(this.sessionId, this.task.task_id);
    await this.send(body);
  }

  private async retry(): Promise<void> {
    if (this.failedBody === null || this.submitting) return;
    await this.send(this.failedBody, true);
  }

  private async send(body: SubmissionBody, isRetry = false): Promise<void> {
    this.submitting = true;
    this.render();
    try {
      await this.api.submitAnnotation(body);
      this.failedBody = null;
      this.hideBanner();
      await this.advance();
    } catch (err) {
      if (err instanceof ApiError) {
        if (isRetry && err.status === 409) {
          // the lost response was for a submission that actually landed
          this.failedBody = null;
          this.hideBanner();
          await this.advance();
          return;
        }
        // server rejected it; the draft is untouched and stays editable
        this.showBanner(`${err.status} ${err.code}: ${err.detail}`, "error");
      } else {
        this.failedBody = body;
        this.showBanner(`network failure: ${describe(err)} (use retry)`, "error");
      }
    } finally {
      this.submitting = false;
      this.render();
    }
  }

  private buildSurveyRows(): void {
    for (const field of SURVEY_FIELDS) {
      const row = document.createElement("div");
      row.className = "survey-row";
      const label = document.createElement("label");
      label.textContent = field.replace("_", " ");
      const input = document.createElement("input");
      input.type = "range";
      input.min = "1";
      input.max = "10";
      input.value = "5";
      input.dataset.field = field;
      const val = document.createElement("span");
      val.textContent = input.value;
      input.addEventListener("input", () => (val.textContent = input.value));
      row.append(label, input, val);
      this.el.surveyRows.append(row);
    }
  }

  private async sendSurvey(): Promise<void> {
    if (!this.surveyMethod) return;
    const scores = {} as SurveyScores;
    this.el.surveyRows.querySelectorAll("input").forEach((input) => {
      scores[input.dataset.field as keyof SurveyScores] = parseInt(input.value, 10);
    });
    try {
      await this.api.submitSurvey(this.sessionId, this.surveyMethod, scores);
      this.surveyMethod = null;
      const next = this.pendingNext;
      this.pendingNext = null;
      this.presentTask(next?.task ?? null);
    } catch (err) {
      this.showBanner(describe(err), "error");
    }
  }

  private render(): void {
    if (!this.task || !this.draft) return;
    const { canvas } = this.el;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (this.image && this.image.complete && this.image.naturalWidth > 0) {
      ctx.drawImage(this.image, 0, 0, canvas.width, canvas.height);
    }

    if (this.draft.method === "singular") {
      this.paintMask(ctx, this.draft.baseRaster(), [60, 190, 90, 110]);
    } else {
      const max = this.draft.maxRaster();
      if (max) this.paintMask(ctx, max, [220, 60, 50, 100]);
      this.paintMask(ctx, this.draft.baseRaster(), [40, 90, 220, 110]);
    }

    if (this.pending.length > 0) {
      ctx.strokeStyle = "#ffd43b";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(this.pending[0][0] * ZOOM, this.pending[0][1] * ZOOM);
      for (const [x, y] of this.pending.slice(1)) {
        ctx.lineTo(x * ZOOM, y * ZOOM);
      }
      ctx.stroke();
      for (const [x, y] of this.pending) {
        ctx.fillStyle = "#ffd43b";
        ctx.fillRect(x * ZOOM - 2, y * ZOOM - 2, 4, 4);
      }
    }

    const phase = this.draft.phase;
    this.el.status.textContent =
      `task ${this.task.position + 1}/${this.task.total} - ` +
      `${this.task.method} method - ${phase} - ${this.draft.editOpCount} edits`;
    this.el.undoBtn.disabled = !this.draft.canUndo;
    this.el.redoBtn.disabled = !this.draft.canRedo;
    this.el.copyBtn.style.display = this.draft.method === "cc" ? "" : "none";
    this.el.copyBtn.disabled = !this.draft.canCopyMinToMax();
    this.el.submitBtn.disabled = this.submitting || !this.draft.canSubmit();
    this.el.retryBtn.style.display = this.failedBody ? "" : "none";
  }

  private paintMask(ctx: CanvasRenderingContext2D, mask: Mask, rgba: number[]): void {
    const [r, g, b, a] = rgba;
    ctx.fillStyle = `rgba(${r}, ${g}, ${b}, ${a / 255})`;
    for (let y = 0; y < mask.height; y++) {
      for (let x = 0; x < mask.width; x++) {
        if (mask.get(x, y)) ctx.fillRect(x * ZOOM, y * ZOOM, ZOOM, ZOOM);
      }
    }
  }

  private showBanner(text: string, kind: "error" | "info"): void {
    this.el.banner.textContent = text;
    this.el.banner.className = kind;
  }

  private hideBanner(): void {
    this.el.banner.className = "";
    this.el.banner.textContent = "";
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status} ${err.code}: ${err.detail}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

new AnnotatorApp();
