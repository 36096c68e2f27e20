import { describe, expect, it } from "vitest";

import type { TreeEdge, TreeResponse } from "../src/api.js";
import { describeEvent, edgeLabel, renderTreeLines, senseBar } from "../src/format.js";

// the two-branch fixture: 0.7 -> IMG.2 -> IMG.3 and 0.3 -> IMG.4 -> IMG.5
function fixtureTree(): NonNullable<TreeResponse["tree"]> {
  const chain = (edges: Array<[string, number, number]>): TreeEdge => {
    let head: TreeEdge | undefined;
    for (const [label, probability, delta] of [...edges].reverse()) {
      head = {
        node: label,
        label,
        probability,
        delta,
        count: 1,
        children: head ? [head] : [],
      };
    }
    return head!;
  };
  return {
    root: "IMG.1",
    label: "IMG.1",
    children: [
      chain([
        ["IMG.2", 0.7, 0.0],
        ["IMG.3", 1.0, 0.0],
      ]),
      chain([
        ["IMG.4", 0.3, 0.0],
        ["IMG.5", 1.0, 0.0],
      ]),
    ],
  };
}

describe("future-tree rendering", () => {
  it("renders the fixture tree with 0.70/0.30 edge labels", () => {
    const lines = renderTreeLines(fixtureTree());
    expect(lines).toEqual([
      "-->IMG.1--[0.70,0.00]-->IMG.2--[1.00,0.00]-->IMG.3",
      "-->IMG.1--[0.30,0.00]-->IMG.4--[1.00,0.00]-->IMG.5",
    ]);
  });

  it("marks elided depth with a count", () => {
    const tree: NonNullable<TreeResponse["tree"]> = {
      root: "IMG.1",
      label: "IMG.1",
      children: [
        { node: "IMG.2", label: "IMG.2", probability: 1, delta: 0, count: 3, elided: 4, children: [] },
      ],
    };
    expect(renderTreeLines(tree)).toEqual(["-->IMG.1--[1.00,0.00]-->IMG.2--...(+4)"]);
  });

  it("formats probability and delta to two decimals", () => {
    const edge: TreeEdge = { node: "SPK.1", label: "SPK.w-i-l", probability: 0.034, delta: 0.214, count: 2 };
    expect(edgeLabel(edge)).toBe("[0.03,0.21]");
  });
});

describe("sense bars", () => {
  it("maps hunger and comfort into their bounds", () => {
    expect(senseBar("hunger", 0)).toBe(0);
    expect(senseBar("hunger", 10)).toBe(100);
    expect(senseBar("comfort", 0)).toBe(50);
    expect(senseBar("comfort", -5)).toBe(0);
    expect(senseBar("comfort", 7)).toBe(100); // clamped
  });
});

describe("event lines", () => {
  it("describes the kinds the feed shows", () => {
    expect(
      describeEvent({ kind: "node_captured", tick: 4, data: { label: "IMG.2", new: true } }),
    ).toBe("4 captured IMG.2 (new)");
    expect(
      describeEvent({ kind: "attention_shift", tick: 9, data: { to: "audio", cause: "reflex" } }),
    ).toBe("9 attention -> audio (reflex)");
  });
});
