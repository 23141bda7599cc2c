/** A catalog fixture matching the control plane's /components shape. */

import type { CatalogEntry } from "../src/types.js";

export const CATALOG: CatalogEntry[] = [
  {
    kind: "event_bus",
    description: "fan-out",
    params: {},
    ports: [
      { direction: "PLUG", kind: "RECORD" },
      { direction: "SOCKET", kind: "RECORD" },
    ],
  },
  {
    kind: "gps_source",
    description: "trace replay",
    params: {
      trace: { type: "list", required: false },
      trace_path: { type: "string", required: false },
      interval_ms: { type: "integer", required: false, default: 1000 },
      user: { type: "string", required: true },
      clock: { type: "string", required: false, default: "simulated", choices: ["simulated", "wall"] },
    },
    ports: [{ direction: "SOCKET", kind: "RECORD" }],
  },
  {
    kind: "sms_device",
    description: "sms transport",
    params: {
      gateway: { type: "string", required: true },
      own_number: { type: "string", required: true },
      peer_number: { type: "string", required: false },
    },
    ports: [
      { direction: "PLUG", kind: "TEXT" },
      { direction: "SOCKET", kind: "TEXT" },
    ],
  },
  {
    kind: "sms_xml_device",
    description: "validating sms transport",
    params: {
      gateway: { type: "string", required: true },
      own_number: { type: "string", required: true },
      peer_number: { type: "string", required: false },
    },
    ports: [
      { direction: "PLUG", kind: "TEXT" },
      { direction: "SOCKET", kind: "TEXT" },
    ],
  },
  {
    kind: "xml_codec_adapter",
    description: "kind adapter",
    params: {
      direction: { type: "string", required: true, choices: ["RECORD_TO_TEXT", "TEXT_TO_RECORD"] },
      codec: { type: "string", required: false, default: "location_xml" },
    },
    ports: [],
    port_variants: {
      RECORD_TO_TEXT: [
        { direction: "PLUG", kind: "RECORD" },
        { direction: "SOCKET", kind: "TEXT" },
      ],
      TEXT_TO_RECORD: [
        { direction: "PLUG", kind: "TEXT" },
        { direction: "SOCKET", kind: "RECORD" },
      ],
    },
    variant_param: "direction",
  },
  {
    kind: "file_sink",
    description: "date-stamped files",
    params: { directory: { type: "string", required: true } },
    ports: [{ direction: "PLUG", kind: "TEXT" }],
  },
];

export const MOBILE_SPEC = {
  components: [
    {
      id: "gps",
      catalog_kind: "gps_source",
      params: {
        user: "+447700900123",
        interval_ms: 100,
        trace: [
          { lat: 56.34, lon: -2.8, time: "2002-09-01T12:00:00Z" },
          { lat: 56.341, lon: -2.799, time: "2002-09-01T12:00:01Z" },
          { lat: 56.342, lon: -2.798, time: "2002-09-01T12:00:02Z" },
        ],
      },
    },
    { id: "xml_generator", catalog_kind: "xml_codec_adapter", params: { direction: "RECORD_TO_TEXT" } },
    { id: "gps_adapter", catalog_kind: "xml_codec_adapter", params: { direction: "TEXT_TO_RECORD" } },
    { id: "bus", catalog_kind: "event_bus", params: {} },
    { id: "sms_adapter", catalog_kind: "xml_codec_adapter", params: { direction: "RECORD_TO_TEXT" } },
    {
      id: "sms",
      catalog_kind: "sms_device",
      params: { gateway: "loopback:workbench", own_number: "+447700900123", peer_number: "+440000000001" },
    },
  ],
  connections: [
    { from: "gps", to: "xml_generator" },
    { from: "xml_generator", to: "gps_adapter" },
    { from: "gps_adapter", to: "bus" },
    { from: "bus", to: "sms_adapter" },
    { from: "sms_adapter", to: "sms" },
  ],
};
