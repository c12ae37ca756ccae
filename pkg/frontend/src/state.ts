/** App state and its pure transitions.
 *
 * Everything here is derived from the last server responses; no label
 * state lives only on the client, so a refresh loses nothing.
 */

import type { ClusterCardView, FinalizeReply, StatusView } from "./api.js";

export interface AppState {
  status: StatusView | null;
  clusters: ClusterCardView[];
  /** clusters a 409 finalize named as unlabeled */
  highlight: number[];
  done: FinalizeReply | null;
  /** transient banner text; never wipes the data already on screen */
  error: string | null;
}

export function initialState(): AppState {
  return { status: null, clusters: [], highlight: [], done: null, error: null };
}

export function withServerData(
  state: AppState,
  status: StatusView,
  clusters: ClusterCardView[],
): AppState {
  const live = new Set(clusters.filter((c) => c.label === null).map((c) => c.cluster_index));
  return {
    ...state,
    status,
    clusters,
    // keep only highlights that are still unlabeled
    highlight: state.highlight.filter((i) => live.has(i)),
    error: null,
  };
}

export function withConflict(state: AppState, unlabeled: number[]): AppState {
  return { ...state, highlight: unlabeled.slice().sort((a, b) => a - b) };
}

export function withFinalized(state: AppState, done: FinalizeReply): AppState {
  return { ...state, done, highlight: [], error: null };
}

export function withError(state: AppState, message: string): AppState {
  return { ...state, error: message };
}

/** Distinct labels in first-use order; feeds the palette and 1-9 keys. */
export function palette(clusters: ClusterCardView[]): string[] {
  const seen: string[] = [];
  for (const c of clusters) {
    if (c.label !== null && !seen.includes(c.label)) {
      seen.push(c.label);
    }
  }
  return seen;
}

export function progress(state: AppState): { labeled: number; total: number } {
  const total = state.clusters.length;
  const labeled = state.clusters.filter((c) => c.label !== null).length;
  return { labeled, total };
}

export function firstUnlabeled(state: AppState): number | null {
  const hit = state.clusters.find((c) => c.label === null);
  return hit ? hit.cluster_index : null;
}
