import { describe, expect, it } from "vitest";

import { CanvasGraph } from "../src/graph.js";

describe("CanvasGraph", () => {
  it("exports the spec without layout and the doc with it", () => {
    const graph = new CanvasGraph();
    graph.place({ id: "bus_1", catalog_kind: "event_bus", params: {} }, 10, 20);
    graph.place(
      { id: "sink_1", catalog_kind: "file_sink", params: { directory: "out" } },
      200,
      40,
    );
    graph.addConnection("bus_1", "sink_1");

    const spec = graph.toSpec();
    expect(spec.components).toEqual([
      { id: "bus_1", catalog_kind: "event_bus", params: {} },
      { id: "sink_1", catalog_kind: "file_sink", params: { directory: "out" } },
    ]);
    expect(spec.connections).toEqual([{ from: "bus_1", to: "sink_1" }]);

    const doc = graph.toDoc();
    expect(doc.layout).toEqual({ bus_1: { x: 10, y: 20 }, sink_1: { x: 200, y: 40 } });
  });

  it("round-trips through export and import", () => {
    const graph = new CanvasGraph();
    graph.place({ id: "a", catalog_kind: "event_bus", params: {} }, 5, 6);
    graph.place({ id: "b", catalog_kind: "event_bus", params: {} }, 7, 8);
    graph.addConnection("a", "b");
    const restored = CanvasGraph.fromDoc(JSON.parse(JSON.stringify(graph.toDoc())));
    expect(restored.toDoc()).toEqual(graph.toDoc());
  });

  it("generates fresh instance ids per kind", () => {
    const graph = new CanvasGraph();
    expect(graph.nextId("event_bus")).toBe("event_bus_1");
    graph.place({ id: "event_bus_1", catalog_kind: "event_bus", params: {} }, 0, 0);
    expect(graph.nextId("event_bus")).toBe("event_bus_2");
  });

  it("removing a component drops its connections", () => {
    const graph = new CanvasGraph();
    graph.place({ id: "a", catalog_kind: "event_bus", params: {} }, 0, 0);
    graph.place({ id: "b", catalog_kind: "event_bus", params: {} }, 0, 0);
    graph.addConnection("a", "b");
    graph.remove("b");
    expect(graph.toSpec().connections).toEqual([]);
  });
});
