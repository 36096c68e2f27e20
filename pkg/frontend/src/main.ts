// Wire the panels to the API and the live event stream. The page keeps no
// learning state of its own: reloading rebuilds everything from /state and
// the replayed recent events.

import { AgentEvent, ApiClient, EventStream } from "./api.js";
import {
  createBanner,
  createEventFeed,
  createKbPanel,
  createPalettePanel,
  createProjectionPanel,
  createRewardPanel,
  createStatePanel,
  createTreePanel,
} from "./views.js";

const api = new ApiClient(localStorage.getItem("rtop-base") ?? "");

const banner = createBanner();
const state = createStatePanel();
const palette = createPalettePanel(api);
const rewards = createRewardPanel(api);
const trees = createTreePanel(api);
const projection = createProjectionPanel(api);
const kb = createKbPanel(api);
const feed = createEventFeed();

const layout = document.createElement("div");
layout.className = "layout";
const left = document.createElement("div");
left.className = "column";
left.append(state.root, palette.root, rewards.root);
const middle = document.createElement("div");
middle.className = "column wide";
middle.append(trees.root, projection.root);
const right = document.createElement("div");
right.className = "column";
right.append(kb.root, feed.root);
layout.append(left, middle, right);
document.body.append(banner.root, layout);

let lastPercept: string | undefined;

async function refreshState(): Promise<void> {
  const view = await api.getState();
  state.update(view, lastPercept);
  trees.update(view);
}

function onEvent(event: AgentEvent): void {
  feed.push(event);
  if (event.kind === "projection_frame") {
    void projection.refresh();
  }
  if (event.kind === "node_captured" || event.kind === "reward_applied" || event.kind === "future_built") {
    void refreshState();
  }
  if (event.kind === "generalization_report") {
    void kb.refresh();
    void refreshState();
  }
}

const stream = new EventStream(api, onEvent, banner.set);

async function boot(): Promise<void> {
  await refreshState();
  await palette.refresh();
  await kb.refresh();
  await projection.refresh();
  stream.connect();
}

void boot();
