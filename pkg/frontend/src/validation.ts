/**
 * Client-side replica of the server's assembly-spec validation.
 *
 * Mirrors the control plane's check order exactly so a rejected spec
 * surfaces the same machine-readable code the server would return, and a
 * spec accepted here is accepted by POST /assemblies.
 */

import type {
  AssemblySpecDoc,
  CatalogEntry,
  ErrorCode,
  EventKind,
  PortSpec,
  Verdict,
} from "./types.js";

export function catalogByKind(entries: CatalogEntry[]): Map<string, CatalogEntry> {
  return new Map(entries.map((e) => [e.kind, e]));
}

/** Resolve a component's ports, honoring variant params (e.g. adapter direction). */
export function resolvePorts(
  entry: CatalogEntry,
  params: Record<string, unknown>,
): PortSpec[] | null {
  if (entry.port_variants && entry.variant_param) {
    const raw = params[entry.variant_param];
    if (typeof raw !== "string") return null;
    return entry.port_variants[raw.toUpperCase()] ?? null;
  }
  return entry.ports;
}

function socketKinds(ports: PortSpec[]): Set<EventKind> {
  return new Set(ports.filter((p) => p.direction === "SOCKET").map((p) => p.kind));
}

function plugKinds(ports: PortSpec[]): Set<EventKind> {
  return new Set(ports.filter((p) => p.direction === "PLUG").map((p) => p.kind));
}

function reject(code: ErrorCode, detail: string): Verdict {
  return { ok: false, code, detail };
}

function missingRequiredParam(entry: CatalogEntry, params: Record<string, unknown>): string | null {
  for (const [name, spec] of Object.entries(entry.params)) {
    if (!spec.required) continue;
    const value = params[name];
    if (value === undefined || value === null || value === "") return name;
  }
  // the GPS source additionally needs a trace, inline or by path
  if (entry.kind === "gps_source" && !("trace" in params) && !("trace_path" in params)) {
    return "trace";
  }
  return null;
}

function checkParamChoices(entry: CatalogEntry, params: Record<string, unknown>): string | null {
  for (const [name, spec] of Object.entries(entry.params)) {
    if (!spec.choices) continue;
    const value = params[name];
    if (value === undefined || value === null) continue;
    if (typeof value !== "string") return name;
    const accepted = entry.variant_param === name ? value.toUpperCase() : value;
    if (!spec.choices.includes(accepted)) return name;
  }
  return null;
}

interface Placed {
  id: string;
  sockets: Set<EventKind>;
  plugs: Set<EventKind>;
}

/** Full-spec validation; identical verdicts (and codes) to POST /assemblies. */
export function validateSpec(spec: AssemblySpecDoc, catalog: CatalogEntry[]): Verdict {
  const byKind = catalogByKind(catalog);
  if (!Array.isArray(spec.components) || spec.components.length === 0) {
    return reject("BadParams", "spec requires a non-empty components list");
  }
  if (!Array.isArray(spec.connections)) {
    return reject("BadParams", "connections must be a list");
  }
  const placed = new Map<string, Placed>();
  for (const comp of spec.components) {
    if (typeof comp !== "object" || comp === null) {
      return reject("BadParams", "each component must be an object");
    }
    const entry = byKind.get(String(comp.catalog_kind));
    if (!entry) return reject("UnknownCatalogKind", String(comp.catalog_kind));
    const id = String(comp.id ?? "");
    if (!id) return reject("BadParams", "each component requires an id");
    const params = comp.params ?? {};
    if (typeof params !== "object" || Array.isArray(params)) {
      return reject("BadParams", `${id}: params must be an object`);
    }
    const missing = missingRequiredParam(entry, params);
    if (missing) return reject("BadParams", `${entry.kind} requires param '${missing}'`);
    const badChoice = checkParamChoices(entry, params);
    if (badChoice) return reject("BadParams", `${id}: bad value for '${badChoice}'`);
    const ports = resolvePorts(entry, params);
    if (ports === null) return reject("BadParams", `${id}: unresolvable ports`);
    if (placed.has(id)) return reject("DuplicateComponentId", id);
    placed.set(id, { id, sockets: socketKinds(ports), plugs: plugKinds(ports) });
  }
  const edges: { from: string; to: string }[] = [];
  for (const conn of spec.connections) {
    const verdict = checkWire(conn?.from, conn?.to, placed, edges);
    if (!verdict.ok) return verdict;
    edges.push({ from: String(conn.from), to: String(conn.to) });
  }
  return { ok: true };
}

function reaches(start: string, target: string, edges: { from: string; to: string }[]): boolean {
  if (start === target) return true;
  const seen = new Set([start]);
  const stack = [start];
  while (stack.length > 0) {
    const node = stack.pop()!;
    for (const edge of edges) {
      if (edge.from !== node) continue;
      if (edge.to === target) return true;
      if (!seen.has(edge.to)) {
        seen.add(edge.to);
        stack.push(edge.to);
      }
    }
  }
  return false;
}

function checkWire(
  fromRaw: unknown,
  toRaw: unknown,
  placed: Map<string, Placed>,
  edges: { from: string; to: string }[],
): Verdict {
  if (fromRaw === undefined || toRaw === undefined) {
    return reject("BadParams", "each connection requires from and to");
  }
  const from = String(fromRaw);
  const to = String(toRaw);
  const up = placed.get(from);
  if (!up) return reject("UnknownComponent", from);
  const down = placed.get(to);
  if (!down) return reject("UnknownComponent", to);
  const kinds = [...up.sockets].filter((k) => down.plugs.has(k));
  if (kinds.length === 0) return reject("KindMismatch", `${from} -> ${to}`);
  if (kinds.length > 1) return reject("AmbiguousPorts", `${from} and ${to} are compatible on both kinds`);
  if (reaches(to, from, edges)) return reject("CycleWouldForm", `${from} -> ${to}`);
  return { ok: true };
}

/** Single-wire validation for the canvas: same codes the server would return. */
export function validateWire(
  spec: AssemblySpecDoc,
  catalog: CatalogEntry[],
  from: string,
  to: string,
): Verdict {
  const probe: AssemblySpecDoc = {
    components: spec.components,
    connections: [...spec.connections, { from, to }],
  };
  return validateSpec(probe, catalog);
}
