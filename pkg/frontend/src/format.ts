// Pure rendering helpers: the tree text format mirrors the service's
// inspect output, so the panel and the CLI read the same way.

import type { TreeEdge, TreeResponse } from "./api.js";

export function edgeLabel(edge: TreeEdge): string {
  return `[${edge.probability.toFixed(2)},${edge.delta.toFixed(2)}]`;
}

export function renderTreeLines(tree: NonNullable<TreeResponse["tree"]>): string[] {
  const lines: string[] = [];

  const walk = (edges: TreeEdge[], prefix: string): void => {
    for (const edge of edges) {
      const segment = `${prefix}--${edgeLabel(edge)}-->${edge.label}`;
      if (edge.children && edge.children.length > 0) {
        walk(edge.children, segment);
      } else if (edge.elided && edge.elided > 0) {
        lines.push(`${segment}--...(+${edge.elided})`);
      } else {
        lines.push(segment);
      }
    }
  };

  walk(tree.children, `-->${tree.label}`);
  return lines;
}

export function formatPnet(value: number): string {
  return value >= 0 ? `+${value.toFixed(2)}` : value.toFixed(2);
}

// Bar width in percent for a sense level within its bounds.
export function senseBar(sense: string, level: number): number {
  const bounds: Record<string, [number, number]> = {
    hunger: [0, 10],
    comfort: [-5, 5],
  };
  const [lo, hi] = bounds[sense] ?? [-10, 10];
  const frac = (level - lo) / (hi - lo);
  return Math.round(Math.min(1, Math.max(0, frac)) * 100);
}

export function describeEvent(event: { kind: string; tick: number; data: Record<string, unknown> }): string {
  const d = event.data;
  switch (event.kind) {
    case "node_captured":
      return `${event.tick} captured ${d.label ?? d.node}${d.new ? " (new)" : ""}`;
    case "match_found":
      return `${event.tick} matched ${d.node} d=${(d.distance as number).toFixed(3)}`;
    case "action_taken":
      return `${event.tick} ${d.mode === "learned" ? "action" : "explore"} ${d.label}`;
    case "reward_applied":
      return `${event.tick} reward ${d.reward} ${d.sense}=${d.level}`;
    case "attention_shift":
      return `${event.tick} attention -> ${d.to} (${d.cause})`;
    case "future_built":
      return `${event.tick} rebuilt ${d.count} future-trees`;
    case "generalization_report":
      return `${event.tick} offline pass: ${d.reductions} reductions`;
    case "projection_frame":
      return `${event.tick} projected frame ${d.index}`;
    default:
      return `${event.tick} ${event.kind}`;
  }
}
