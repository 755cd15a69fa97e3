import fs from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

import type { ControlRecord, SessionSnapshot, WireEvent } from "../src/types.js";

const here = path.dirname(fileURLToPath(import.meta.url));

export interface GoldenScenario {
  events: WireEvent[];
  finalState: SessionSnapshot;
}

export function loadGolden(name: string): GoldenScenario {
  const file = path.resolve(here, "../../scenarios", name);
  const lines = fs.readFileSync(file, "utf-8").trim().split("\n");
  const events = lines.slice(1, -1).map((line) => JSON.parse(line).event as WireEvent);
  const finalState = JSON.parse(lines[lines.length - 1]).final_state as SessionSnapshot;
  return { events, finalState };
}

export function radioControl(label: string, overrides: Partial<ControlRecord> = {}): ControlRecord {
  return {
    type: "option",
    label,
    description: `choose ${label}`,
    options: { A: `First behavior for ${label}`, B: `Second behavior for ${label}` },
    appearance: "single-select-radio",
    value: `First behavior for ${label}`,
    reason: `why ${label} matters`,
    ...overrides,
  };
}

export function checkboxControl(label: string): ControlRecord {
  return {
    type: "option",
    label,
    description: `pick ${label}`,
    options: { X: `Include ${label} X`, Y: `Include ${label} Y` },
    appearance: "multi-select-checkbox",
    value: [`Include ${label} X`],
    reason: `why ${label} matters`,
  };
}

export function textControl(label: string): ControlRecord {
  return {
    type: "text",
    label,
    description: `free-form ${label}`,
    value: "some text",
    reason: `why ${label} matters`,
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}
