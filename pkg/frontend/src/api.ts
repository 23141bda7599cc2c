/** Thin fetch client for the control plane. */

import type {
  AssemblySpecDoc,
  CatalogEntry,
  LocationBody,
  RadarEntryBody,
  SmartTownEntry,
  TapEntry,
  TrailBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export class ControlPlane {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      headers: { accept: "application/json", "content-type": "application/json" },
      ...init,
    });
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, body.error ?? "HttpError", body.detail ?? resp.statusText);
    }
    return body as T;
  }

  loadCatalog(): Promise<CatalogEntry[]> {
    return this.request("/components");
  }

  async createAssembly(spec: AssemblySpecDoc): Promise<string> {
    const body = await this.request<{ id: string }>("/assemblies", {
      method: "POST",
      body: JSON.stringify(spec),
    });
    return body.id;
  }

  startAssembly(id: string): Promise<{ state: string }> {
    return this.request(`/assemblies/${id}/start`, { method: "POST" });
  }

  stopAssembly(id: string): Promise<{ state: string }> {
    return this.request(`/assemblies/${id}/stop`, { method: "POST" });
  }

  assemblyEvents(id: string): Promise<TapEntry[]> {
    return this.request(`/assemblies/${id}/events`);
  }

  userLocation(user: string): Promise<LocationBody> {
    return this.request(`/users/${encodeURIComponent(user)}/location`);
  }

  userTrail(user: string, from?: string, to?: string): Promise<TrailBody> {
    const params = new URLSearchParams();
    if (from) params.set("from", from);
    if (to) params.set("to", to);
    const q = params.toString();
    return this.request(`/users/${encodeURIComponent(user)}/trail${q ? "?" + q : ""}`);
  }

  smartTown(lat: number, lon: number, radius: number, category?: string): Promise<{ entries: SmartTownEntry[] }> {
    const params = new URLSearchParams({ lat: String(lat), lon: String(lon), radius: String(radius) });
    if (category) params.set("category", category);
    return this.request(`/smarttown?${params}`);
  }

  radar(user: string, radius: number): Promise<{ entries: RadarEntryBody[] }> {
    return this.request(`/users/${encodeURIComponent(user)}/radar?radius=${radius}`);
  }

  mapUrl(imageId: string): string {
    return `${this.baseUrl}/maps/${encodeURIComponent(imageId)}`;
  }

  /**
   * Subscribe to the NDJSON live event stream; onEvent per message until
   * the server closes or `abort` fires. Resolves when the stream ends.
   */
  async streamEvents(
    id: string,
    onEvent: (entry: TapEntry) => void,
    abort: AbortSignal,
  ): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/assemblies/${id}/stream`, {
      signal: abort,
      headers: { accept: "application/x-ndjson" },
    });
    if (!resp.ok || resp.body === null) {
      throw new ApiError(resp.status, "StreamFailed", resp.statusText);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      for (;;) {
        const nl = buffer.indexOf("\n");
        if (nl < 0) break;
        const line = buffer.slice(0, nl).trim();
        buffer = buffer.slice(nl + 1);
        if (line) onEvent(JSON.parse(line) as TapEntry);
      }
    }
  }
}

/** Reconnect-with-backoff wrapper around streamEvents. */
export async function streamWithBackoff(
  api: ControlPlane,
  id: string,
  onEvent: (entry: TapEntry) => void,
  abort: AbortSignal,
  maxBackoffMs = 5000,
): Promise<void> {
  let backoff = 250;
  while (!abort.aborted) {
    try {
      await api.streamEvents(id, onEvent, abort);
      return; // clean end of stream
    } catch (err) {
      if (abort.aborted) return;
      await new Promise((r) => setTimeout(r, backoff));
      backoff = Math.min(backoff * 2, maxBackoffMs);
    }
  }
}
