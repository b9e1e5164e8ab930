/** Snapshot-based undo/redo. */

export class SnapshotHistory<T> {
  private undoStack: T[] = [];
  private redoStack: T[] = [];

  constructor(
    private capture: () => T,
    private restore: (snapshot: T) => void,
    private limit = 200,
  ) {}

  /** Record the current state before a mutation. Clears the redo stack. */
  mark(): void {
    this.undoStack.push(this.capture());
    if (this.undoStack.length > this.limit) {
      this.undoStack.shift();
    }
    this.redoStack.length = 0;
  }

  undo(): boolean {
    const snapshot = this.undoStack.pop();
    if (snapshot === undefined) return false;
    this.redoStack.push(this.capture());
    this.restore(snapshot);
    return true;
  }

  redo(): boolean {
    const snapshot = this.redoStack.pop();
    if (snapshot === undefined) return false;
    this.undoStack.push(this.capture());
    this.restore(snapshot);
    return true;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  get canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  clear(): void {
    this.undoStack.length = 0;
    this.redoStack.length = 0;
  }
}
