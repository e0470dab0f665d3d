import { TERMINAL_STATUSES, type ActionInfo } from "./types.js";

export interface PollerOptions {
  getAction: (actionId: string) => Promise<ActionInfo>;
  onUpdate: (action: ActionInfo) => void;
  /** Network failures mark the action stale and keep retrying. */
  onStale?: (actionId: string, error: unknown) => void;
  intervalMs?: number;
}

export interface StatusPoller {
  track(actionId: string): void;
  pending(): string[];
  stop(): void;
}

/** Polls non-terminal actions every two seconds (matching the executor's
 * base interval); an action leaves the pool once a poll reports a terminal
 * status. Concurrent ticks coalesce: a new round never starts while the
 * previous one is in flight. */
export function createStatusPoller(options: PollerOptions): StatusPoller {
  const interval = options.intervalMs ?? 2000;
  const tracked = new Set<string>();
  let inFlight = false;

  async function tick(): Promise<void> {
    if (inFlight) return;
    inFlight = true;
    try {
      for (const actionId of [...tracked]) {
        try {
          const action = await options.getAction(actionId);
          options.onUpdate(action);
          if (TERMINAL_STATUSES.has(action.status)) tracked.delete(actionId);
        } catch (error) {
          options.onStale?.(actionId, error);
        }
      }
    } finally {
      inFlight = false;
    }
  }

  const timer = setInterval(() => void tick(), interval);

  return {
    track(actionId) {
      tracked.add(actionId);
      void tick();
    },
    pending() {
      return [...tracked];
    },
    stop() {
      clearInterval(timer);
      tracked.clear();
    },
  };
}
