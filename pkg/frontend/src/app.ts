/**
 * Workbench single-page app: compose assemblies from the catalog on a
 * canvas with client-side wire validation, deploy/start/stop them, watch
 * the live event stream, and explore the location/trail/smart-town/radar
 * views. All domain state lives on the server; the page only keeps the
 * exportable graph.
 */

import { ApiError, ControlPlane, streamWithBackoff } from "./api.js";
import { CanvasGraph } from "./graph.js";
import type { CatalogEntry, ComponentDoc, TapEntry } from "./types.js";
import { resolvePorts, validateSpec, validateWire } from "./validation.js";
import { formatDistance, polylinePoints, radarPlot, smartTownPages } from "./views.js";

const api = new ControlPlane("");

const DEMO_TRACE = [
  { lat: 56.34, lon: -2.8, time: "2002-09-01T12:00:00Z" },
  { lat: 56.341, lon: -2.799, time: "2002-09-01T12:00:01Z" },
  { lat: 56.342, lon: -2.798, time: "2002-09-01T12:00:02Z" },
];

const DEFAULT_PARAM_VALUES: Record<string, unknown> = {
  user: "+447700900123",
  own_number: "+447700900123",
  peer_number: "+440000000001",
  gateway: "loopback:default",
  directory: "sink-out",
  interval_ms: 250,
};

let catalog: CatalogEntry[] = [];
const graph = new CanvasGraph();
let wireSource: string | null = null;
let selectedId: string | null = null;
let deployedId: string | null = null;
let streamAbort: AbortController | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(message: string, kind: "info" | "error" = "info"): void {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message;
  box.className = `banner ${kind}`;
  box.style.display = message ? "block" : "none";
}

function defaultParams(entry: CatalogEntry): Record<string, unknown> {
  const params: Record<string, unknown> = {};
  for (const [name, spec] of Object.entries(entry.params)) {
    if (name in DEFAULT_PARAM_VALUES) params[name] = DEFAULT_PARAM_VALUES[name];
    else if (spec.choices && spec.choices.length > 0) params[name] = spec.choices[0];
    else if (spec.default !== undefined) params[name] = spec.default;
  }
  if (entry.kind === "gps_source") params.trace = DEMO_TRACE;
  return params;
}

// --- palette ------------------------------------------------------------

async function renderPalette(): Promise<void> {
  const box = el<HTMLDivElement>("palette");
  box.textContent = "";
  try {
    catalog = await api.loadCatalog();
    banner("");
  } catch (err) {
    banner(`cannot reach control plane: ${err}`, "error");
    return;
  }
  for (const entry of catalog) {
    const item = document.createElement("button");
    item.className = "palette-entry";
    const ports = entry.port_variants
      ? "ports vary by direction"
      : entry.ports.map((p) => `${p.direction[0]}:${p.kind}`).join(" ");
    item.innerHTML = `<strong>${entry.kind}</strong><br><small>${ports}</small>`;
    item.title = entry.description;
    item.addEventListener("click", () => placeComponent(entry));
    box.appendChild(item);
  }
}

// --- canvas ------------------------------------------------------------

function placeComponent(entry: CatalogEntry): void {
  const id = graph.nextId(entry.kind);
  const index = graph.components.length;
  graph.place(
    { id, catalog_kind: entry.kind, params: defaultParams(entry) },
    30 + (index % 4) * 170,
    30 + Math.floor(index / 4) * 110,
  );
  renderCanvas();
}

function portBadge(comp: ComponentDoc): string {
  const entry = catalog.find((e) => e.kind === comp.catalog_kind);
  if (!entry) return "";
  const ports = resolvePorts(entry, comp.params) ?? [];
  return ports.map((p) => `${p.direction === "PLUG" ? "▸" : "▹"}${p.kind[0]}`).join(" ");
}

function renderCanvas(): void {
  const canvas = el<HTMLDivElement>("canvas");
  canvas.querySelectorAll(".node").forEach((n) => n.remove());
  const svg = el<HTMLElement>("wires");
  svg.innerHTML = "";
  for (const comp of graph.components) {
    const node = document.createElement("div");
    node.className = "node" + (comp.id === wireSource ? " wire-source" : "") +
      (comp.id === selectedId ? " selected" : "");
    node.style.left = `${comp.x}px`;
    node.style.top = `${comp.y}px`;
    node.innerHTML = `<div class="node-title">${comp.id}</div>` +
      `<div class="node-ports">${portBadge(comp)}</div>`;
    node.addEventListener("click", (ev) => {
      ev.stopPropagation();
      onNodeClick(comp.id);
    });
    canvas.appendChild(node);
  }
  for (const conn of graph.connections) {
    const a = graph.components.find((c) => c.id === conn.from);
    const b = graph.components.find((c) => c.id === conn.to);
    if (!a || !b) continue;
    const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
    line.setAttribute("x1", String(a.x + 75));
    line.setAttribute("y1", String(a.y + 30));
    line.setAttribute("x2", String(b.x + 75));
    line.setAttribute("y2", String(b.y + 30));
    line.setAttribute("marker-end", "url(#arrow)");
    svg.appendChild(line);
  }
  renderParamsEditor();
  updateDeployButton();
}

function onNodeClick(id: string): void {
  if (wireSource === null) {
    wireSource = id;
    selectedId = id;
  } else if (wireSource === id) {
    wireSource = null;
  } else {
    const verdict = validateWire(graph.toSpec(), catalog, wireSource, id);
    if (verdict.ok) {
      graph.addConnection(wireSource, id);
      banner("");
    } else {
      banner(`wire rejected: ${verdict.code}`, "error");
    }
    wireSource = null;
  }
  renderCanvas();
}

function renderParamsEditor(): void {
  const box = el<HTMLDivElement>("params");
  const comp = graph.components.find((c) => c.id === selectedId);
  if (!comp) {
    box.textContent = "select a component to edit its params";
    return;
  }
  box.innerHTML = `<strong>${comp.id}</strong> <button id="remove-node">remove</button>` +
    `<textarea id="params-json" rows="6"></textarea><button id="apply-params">apply</button>`;
  el<HTMLTextAreaElement>("params-json").value = JSON.stringify(comp.params, null, 2);
  el<HTMLButtonElement>("apply-params").addEventListener("click", () => {
    try {
      comp.params = JSON.parse(el<HTMLTextAreaElement>("params-json").value);
      banner("");
    } catch (err) {
      banner(`bad params JSON: ${err}`, "error");
    }
    renderCanvas();
  });
  el<HTMLButtonElement>("remove-node").addEventListener("click", () => {
    graph.remove(comp.id);
    selectedId = null;
    renderCanvas();
  });
}

function updateDeployButton(): void {
  const verdict = graph.components.length
    ? validateSpec(graph.toSpec(), catalog)
    : { ok: false as const, code: "BadParams" as const, detail: "empty" };
  const button = el<HTMLButtonElement>("deploy");
  button.disabled = !verdict.ok;
  button.title = verdict.ok ? "POST the composed assembly" : `invalid: ${"code" in verdict ? verdict.code : ""}`;
}

// --- deploy / run -------------------------------------------------------

async function deploy(): Promise<void> {
  try {
    deployedId = await api.createAssembly(graph.toSpec());
    el<HTMLSpanElement>("assembly-id").textContent = deployedId;
    setStateBadge("CREATED");
    el<HTMLUListElement>("events").innerHTML = "";
    banner(`deployed ${deployedId}`);
  } catch (err) {
    banner(err instanceof ApiError ? `rejected: ${err.message}` : String(err), "error");
  }
}

function setStateBadge(state: string): void {
  const badge = el<HTMLSpanElement>("assembly-state");
  badge.textContent = state;
  badge.className = `badge ${state.toLowerCase()}`;
}

function appendEvent(entry: TapEntry): void {
  const list = el<HTMLUListElement>("events");
  const item = document.createElement("li");
  item.textContent = `${entry.time} ${entry.component} [${entry.kind}] ${entry.preview}`;
  list.appendChild(item);
  list.scrollTop = list.scrollHeight;
}

async function startAssembly(): Promise<void> {
  if (!deployedId) return;
  streamAbort?.abort();
  streamAbort = new AbortController();
  const streaming = streamWithBackoff(api, deployedId, appendEvent, streamAbort.signal);
  try {
    const body = await api.startAssembly(deployedId);
    setStateBadge(body.state);
  } catch (err) {
    banner(String(err), "error");
  }
  void streaming;
}

async function stopAssembly(): Promise<void> {
  if (!deployedId) return;
  try {
    const body = await api.stopAssembly(deployedId);
    setStateBadge(body.state);
  } finally {
    streamAbort?.abort();
    streamAbort = null;
  }
}

// --- import/export -------------------------------------------------------

function exportGraph(): void {
  el<HTMLTextAreaElement>("graph-json").value = JSON.stringify(graph.toDoc(), null, 2);
}

function importGraph(): void {
  try {
    const doc = JSON.parse(el<HTMLTextAreaElement>("graph-json").value);
    const imported = CanvasGraph.fromDoc(doc);
    graph.clear();
    graph.components = imported.components;
    graph.connections = imported.connections;
    selectedId = null;
    wireSource = null;
    renderCanvas();
    banner("graph imported");
  } catch (err) {
    banner(`bad graph JSON: ${err}`, "error");
  }
}

// --- query views -----------------------------------------------------------

async function showLocation(): Promise<void> {
  const user = el<HTMLInputElement>("view-user").value;
  const out = el<HTMLDivElement>("view-output");
  try {
    const body = await api.userLocation(user);
    let mapHtml = "";
    if (body.map) {
      mapHtml =
        `<div class="map-wrap"><img src="${api.mapUrl(body.map.image_id)}" alt="map"/>` +
        `<span class="pin" style="left:${body.map.x}px;top:${body.map.y}px"></span></div>`;
    }
    out.innerHTML = `<p>${body.lat.toFixed(5)}, ${body.lon.toFixed(5)} at ${body.timestamp}</p>${mapHtml}`;
  } catch (err) {
    out.textContent = String(err);
  }
}

async function showTrail(): Promise<void> {
  const user = el<HTMLInputElement>("view-user").value;
  const out = el<HTMLDivElement>("view-output");
  try {
    const body = await api.userTrail(user);
    if (!body.view) {
      out.innerHTML = `<p>${body.points.length} points (no calibrated map)</p>`;
      return;
    }
    const points = polylinePoints(body.view);
    out.innerHTML =
      `<div class="map-wrap"><img src="${api.mapUrl(body.view.map)}" alt="map"/>` +
      `<svg class="overlay"><polyline points="${points}"/></svg></div>` +
      `<p>${body.points.length} points on ${body.view.map}</p>`;
  } catch (err) {
    out.textContent = String(err);
  }
}

async function showSmartTown(): Promise<void> {
  const out = el<HTMLDivElement>("view-output");
  try {
    const lat = Number(el<HTMLInputElement>("view-lat").value);
    const lon = Number(el<HTMLInputElement>("view-lon").value);
    const radius = Number(el<HTMLInputElement>("view-radius").value);
    const { entries } = await api.smartTown(lat, lon, radius);
    if (entries.length === 0) {
      out.innerHTML = "<p>nothing nearby</p>";
      return;
    }
    const pages = smartTownPages(entries);
    out.innerHTML = pages
      .map(
        (p, i) =>
          `<div class="town-page" id="town-${i}"><strong>${p.entry.name}</strong> ` +
          `(${p.entry.category}) ${formatDistance(p.entry.distance_m)} ` +
          `${p.prevIndex !== null ? `<a href="#town-${p.prevIndex}">prev</a>` : ""} ` +
          `${p.nextIndex !== null ? `<a href="#town-${p.nextIndex}">next</a>` : ""}</div>`,
      )
      .join("");
  } catch (err) {
    out.textContent = String(err);
  }
}

async function showRadar(): Promise<void> {
  const user = el<HTMLInputElement>("view-user").value;
  const radius = Number(el<HTMLInputElement>("view-radius").value);
  const out = el<HTMLDivElement>("view-output");
  try {
    const { entries } = await api.radar(user, radius);
    const size = 320;
    const center = size / 2;
    const plotted = radarPlot(entries, center, center - 20);
    const dots = plotted
      .map(
        (p) =>
          `<circle cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="5" class="radar-${p.entry.kind.toLowerCase()}">` +
          `<title>${p.entry.name} ${formatDistance(p.entry.distance_m)}</title></circle>`,
      )
      .join("");
    out.innerHTML =
      `<svg class="radar" width="${size}" height="${size}">` +
      `<circle cx="${center}" cy="${center}" r="${center - 20}" class="radar-ring"/>` +
      `<line x1="${center}" y1="${center}" x2="${center}" y2="20" class="radar-north"/>` +
      dots +
      `</svg><p>${entries.length} entries</p>`;
  } catch (err) {
    out.textContent = String(err);
  }
}

// --- boot ------------------------------------------------------------------

export function boot(): void {
  el<HTMLButtonElement>("reload-catalog").addEventListener("click", renderPalette);
  el<HTMLButtonElement>("deploy").addEventListener("click", deploy);
  el<HTMLButtonElement>("start").addEventListener("click", startAssembly);
  el<HTMLButtonElement>("stop").addEventListener("click", stopAssembly);
  el<HTMLButtonElement>("export-graph").addEventListener("click", exportGraph);
  el<HTMLButtonElement>("import-graph").addEventListener("click", importGraph);
  el<HTMLButtonElement>("show-location").addEventListener("click", showLocation);
  el<HTMLButtonElement>("show-trail").addEventListener("click", showTrail);
  el<HTMLButtonElement>("show-smarttown").addEventListener("click", showSmartTown);
  el<HTMLButtonElement>("show-radar").addEventListener("click", showRadar);
  el<HTMLDivElement>("canvas").addEventListener("click", () => {
    wireSource = null;
    selectedId = null;
    renderCanvas();
  });
  void renderPalette();
  renderCanvas();
}

if (typeof document !== "undefined" && document.getElementById("palette")) {
  boot();
}
