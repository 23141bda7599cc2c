/** Shared shapes mirroring the control plane's JSON contracts. */

export type EventKind = "TEXT" | "RECORD";
export type PortDirection = "PLUG" | "SOCKET";

export interface PortSpec {
  direction: PortDirection;
  kind: EventKind;
}

export interface ParamSpec {
  type: string;
  required: boolean;
  default?: unknown;
  choices?: string[];
}

export interface CatalogEntry {
  kind: string;
  description: string;
  params: Record<string, ParamSpec>;
  ports: PortSpec[];
  port_variants?: Record<string, PortSpec[]>;
  variant_param?: string;
}

export interface ComponentDoc {
  id: string;
  catalog_kind: string;
  params: Record<string, unknown>;
}

export interface ConnectionDoc {
  from: string;
  to: string;
}

/** The declarative assembly spec POSTed to /assemblies. */
export interface AssemblySpecDoc {
  components: ComponentDoc[];
  connections: ConnectionDoc[];
}

/** Spec plus canvas layout; the exportable/importable graph document. */
export interface GraphDoc extends AssemblySpecDoc {
  layout: Record<string, { x: number; y: number }>;
}

export type ErrorCode =
  | "UnknownCatalogKind"
  | "BadParams"
  | "DuplicateComponentId"
  | "UnknownComponent"
  | "KindMismatch"
  | "AmbiguousPorts"
  | "CycleWouldForm";

export type Verdict = { ok: true } | { ok: false; code: ErrorCode; detail: string };

export interface TapEntry {
  time: string;
  component: string;
  kind: EventKind;
  preview: string;
}

export interface LocationBody {
  user: string;
  lat: number;
  lon: number;
  timestamp: string;
  map?: { image_id: string; x: number; y: number };
}

export interface TrailBody {
  user: string;
  points: LocationBody[];
  view?: {
    map: string;
    bbox: { south: number; west: number; north: number; east: number };
    pixels: { x: number; y: number }[];
  };
}

export interface SmartTownEntry {
  id: string;
  name: string;
  category: string;
  lat: number;
  lon: number;
  info: string;
  distance_m: number;
  prev: string | null;
  next: string | null;
}

export interface RadarEntryBody {
  kind: "LANDMARK" | "FACILITY" | "USER";
  id: string;
  name: string;
  distance_m: number;
  bearing_deg: number;
}
