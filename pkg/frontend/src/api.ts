/** Typed client for the labeling service HTTP API. Same-origin only. */

export interface ExemplarView {
  id: string;
  thumbnail_url: string;
}

export interface ClusterCardView {
  cluster_index: number;
  size: number;
  label: string | null;
  exemplars: ExemplarView[];
}

export interface StatusView {
  n: number;
  retained: number;
  rejected: number;
  clusters: number;
  labeled_clusters: number;
  revision: number;
}

export interface RevisionReply {
  revision: number;
}

export interface FinalizeReply {
  labeled_count: number;
  output_path: string;
}

/** Non-2xx reply; `body` is the parsed JSON payload when there was one. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(method: string, path: string, payload?: unknown): Promise<T> {
  const init: RequestInit = { method };
  if (payload !== undefined) {
    init.headers = { "Content-Type": "application/json" };
    init.body = JSON.stringify(payload);
  }
  const res = await fetch(path, init);
  let body: unknown = null;
  try {
    body = await res.json();
  } catch {
    // non-JSON reply; body stays null
  }
  if (!res.ok) {
    throw new ApiError(res.status, body, `${method} ${path} -> ${res.status}`);
  }
  return body as T;
}

export function fetchStatus(): Promise<StatusView> {
  return request("GET", "/api/status");
}

export function fetchClusters(): Promise<ClusterCardView[]> {
  return request("GET", "/api/clusters");
}

export function putLabel(index: number, label: string): Promise<RevisionReply> {
  return request("PUT", `/api/clusters/${index}/label`, { label });
}

export function clearLabel(index: number): Promise<RevisionReply> {
  return request("DELETE", `/api/clusters/${index}/label`);
}

export function finalize(): Promise<FinalizeReply> {
  return request("POST", "/api/finalize");
}

/** Index list out of a 409 finalize reply, [] for anything else. */
export function unlabeledFrom(err: unknown): number[] {
  if (err instanceof ApiError && err.status === 409) {
    const body = err.body as { unlabeled?: unknown };
    if (Array.isArray(body?.unlabeled)) {
      return body.unlabeled.filter((v): v is number => typeof v === "number");
    }
  }
  return [];
}
