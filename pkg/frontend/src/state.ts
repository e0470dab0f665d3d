import type { ActionInfo, ProjectInfo } from "./types.js";

/** Single UI state container. The auth token lives here (session memory) and
 * is never written to localStorage or cookies. */
export interface ViewState {
  token: string | null;
  userId: string | null;
  projects: ProjectInfo[];
  selectedProjectId: string | null;
  actions: Record<string, ActionInfo>;
  dialogOpen: boolean;
  expertMode: boolean;
  notices: string[];
}

export function initialState(): ViewState {
  return {
    token: null,
    userId: null,
    projects: [],
    selectedProjectId: null,
    actions: {},
    dialogOpen: false,
    expertMode: false,
    notices: [],
  };
}

export interface Store {
  getState(): ViewState;
  update(fn: (state: ViewState) => ViewState): void;
  subscribe(listener: (state: ViewState) => void): () => void;
}

/** Updates are applied and broadcast synchronously in call order, so
 * concurrent pollers and user events serialize through one place. */
export function createStore(initial: ViewState = initialState()): Store {
  let state = initial;
  const listeners = new Set<(state: ViewState) => void>();
  return {
    getState: () => state,
    update(fn) {
      state = fn(state);
      for (const listener of listeners) listener(state);
    },
    subscribe(listener) {
      listeners.add(listener);
      return () => listeners.delete(listener);
    },
  };
}
