// Snapshot-based undo/redo over immutable design states.

export class UndoStack<T> {
  private past: T[] = [];
  private future: T[] = [];

  constructor(private current: T) {}

  get value(): T {
    return this.current;
  }

  push(next: T): void {
    this.past.push(this.current);
    this.current = next;
    this.future = [];
  }

  canUndo(): boolean {
    return this.past.length > 0;
  }

  canRedo(): boolean {
    return this.future.length > 0;
  }

  undo(): T {
    const prev = this.past.pop();
    if (prev !== undefined) {
      this.future.push(this.current);
      this.current = prev;
    }
    return this.current;
  }

  redo(): T {
    const next = this.future.pop();
    if (next !== undefined) {
      this.past.push(this.current);
      this.current = next;
    }
    return this.current;
  }
}
