/**
 * Canvas graph model: placed components with layout positions plus drawn
 * connections. Exports exactly the spec document the server accepts, with
 * layout carried alongside for import.
 */

import type { AssemblySpecDoc, ComponentDoc, ConnectionDoc, GraphDoc } from "./types.js";

export interface PlacedComponent extends ComponentDoc {
  x: number;
  y: number;
}

export class CanvasGraph {
  components: PlacedComponent[] = [];
  connections: ConnectionDoc[] = [];

  place(component: ComponentDoc, x: number, y: number): PlacedComponent {
    const placed = { ...component, x, y };
    this.components.push(placed);
    return placed;
  }

  remove(id: string): void {
    this.components = this.components.filter((c) => c.id !== id);
    this.connections = this.connections.filter((c) => c.from !== id && c.to !== id);
  }

  addConnection(from: string, to: string): void {
    this.connections.push({ from, to });
  }

  nextId(kind: string): string {
    let n = 1;
    while (this.components.some((c) => c.id === `${kind}_${n}`)) n += 1;
    return `${kind}_${n}`;
  }

  /** The server-facing spec document (layout stripped). */
  toSpec(): AssemblySpecDoc {
    return {
      components: this.components.map(({ x: _x, y: _y, ...doc }) => doc),
      connections: this.connections.map((c) => ({ ...c })),
    };
  }

  toDoc(): GraphDoc {
    const layout: GraphDoc["layout"] = {};
    for (const c of this.components) layout[c.id] = { x: c.x, y: c.y };
    return { ...this.toSpec(), layout };
  }

  static fromDoc(doc: GraphDoc): CanvasGraph {
    const graph = new CanvasGraph();
    for (const comp of doc.components ?? []) {
      const at = doc.layout?.[comp.id] ?? { x: 40, y: 40 };
      graph.place(comp, at.x, at.y);
    }
    graph.connections = (doc.connections ?? []).map((c) => ({ ...c }));
    return graph;
  }

  clear(): void {
    this.components = [];
    this.connections = [];
  }
}
