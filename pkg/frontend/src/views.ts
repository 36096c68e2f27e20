// DOM panel builders. Each panel is a plain function returning its root
// element plus an update hook; main.ts wires them to the API and stream.

import { ApiClient, AgentEvent, NodeEntry, StateView, TreeEdge, TreeResponse } from "./api.js";
import { describeEvent, edgeLabel, formatPnet, senseBar } from "./format.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

// --- live state -------------------------------------------------------------

export function createStatePanel() {
  const root = el("div", "panel state-panel");
  root.appendChild(el("h2", undefined, "Agent"));
  const tick = el("div", "state-tick", "tick 0");
  const attention = el("div", "state-attention");
  const happiness = el("div", "state-happiness");
  const pnet = el("div", "state-pnet");
  const offline = el("div", "state-offline", "offline: generalizing");
  offline.style.display = "none";
  const bars = el("div", "sense-bars");
  const thumb = el("img", "percept-thumb") as HTMLImageElement;
  thumb.alt = "current percept";
  root.append(tick, attention, happiness, pnet, bars, offline, thumb);

  const update = (state: StateView, perceptPng?: string) => {
    tick.textContent = `tick ${state.tick}`;
    attention.textContent = `attention: ${state.attention}`;
    happiness.textContent = `happiness: ${formatPnet(state.happiness)}`;
    pnet.textContent = `net pleasure-pain: ${formatPnet(state.p_net)}`;
    offline.style.display = state.offline ? "block" : "none";
    bars.replaceChildren();
    for (const [sense, level] of Object.entries(state.senses)) {
      const row = el("div", "sense-row");
      row.appendChild(el("span", "sense-name", `${sense} ${level}`));
      const bar = el("div", "sense-bar");
      const fill = el("div", "sense-fill");
      fill.style.width = `${senseBar(sense, level)}%`;
      bar.appendChild(fill);
      row.appendChild(bar);
      bars.appendChild(row);
    }
    if (perceptPng) {
      thumb.src = `data:image/png;base64,${perceptPng}`;
    }
  };
  return { root, update };
}

// --- stimulus palette ----------------------------------------------------------

export function createPalettePanel(api: ApiClient) {
  const root = el("div", "panel palette-panel");
  root.appendChild(el("h2", undefined, "Stimuli"));
  const holdRow = el("div", "hold-row");
  const holdLabel = el("span", undefined, "hold ticks: 4");
  const hold = el("input") as HTMLInputElement;
  hold.type = "range";
  hold.min = "1";
  hold.max = "40";
  hold.value = "4";
  hold.oninput = () => (holdLabel.textContent = `hold ticks: ${hold.value}`);
  holdRow.append(holdLabel, hold);
  const imageList = el("div", "palette-list");
  const audioList = el("div", "palette-list");
  const empty = el("div", "palette-empty", "library empty: drop a PNG here to add one");
  root.append(holdRow, el("h3", undefined, "images"), imageList, el("h3", undefined, "tokens"), audioList, empty);

  root.addEventListener("dragover", (e) => e.preventDefault());
  root.addEventListener("drop", async (e) => {
    e.preventDefault();
    const file = e.dataTransfer?.files?.[0];
    if (!file) return;
    const buffer = await file.arrayBuffer();
    const b64 = btoa(String.fromCharCode(...new Uint8Array(buffer)));
    await api.uploadImage(file.name.replace(/\.[^.]*$/, ""), b64, parseInt(hold.value, 10));
    await refresh();
  });

  const refresh = async () => {
    const library = await api.getLibrary();
    imageList.replaceChildren();
    audioList.replaceChildren();
    for (const name of library.images) {
      const button = el("button", "palette-item", name);
      button.onclick = () => api.presentImage(name, parseInt(hold.value, 10));
      imageList.appendChild(button);
    }
    for (const name of library.audio) {
      const button = el("button", "palette-item token", name);
      button.title = "sends the token and plays it locally";
      button.onclick = async () => {
        void api.playAudio(name);
        const { wav_base64 } = await api.getTokenWav(name);
        void new Audio(`data:audio/wav;base64,${wav_base64}`).play().catch(() => {});
      };
      audioList.appendChild(button);
    }
    const bare = library.images.length === 0 && library.audio.length === 0;
    empty.style.display = bare ? "block" : "none";
    for (const button of root.querySelectorAll("button")) {
      (button as HTMLButtonElement).disabled = false;
    }
  };
  return { root, refresh };
}

// --- rewards ----------------------------------------------------------------------

export function createRewardPanel(api: ApiClient) {
  const root = el("div", "panel reward-panel");
  root.appendChild(el("h2", undefined, "Rewards"));
  const feed = el("button", "reward-feed", "feed (quench hunger)");
  feed.onclick = () => api.feed();
  const row = el("div", "comfort-row");
  const minus = el("button", "comfort-btn", "comfort −1");
  const plus = el("button", "comfort-btn", "comfort +1");
  minus.title = "clamps at -5; further clicks there change nothing";
  plus.title = "clamps at +5; further clicks there change nothing";
  minus.onclick = () => api.comfort(-1);
  plus.onclick = () => api.comfort(1);
  row.append(minus, plus);
  const controls = el("div", "run-row");
  const step = el("button", undefined, "step 1");
  step.onclick = () => api.control("step", { ticks: 1 });
  const run = el("button", undefined, "run");
  run.onclick = () => api.control("resume");
  const pause = el("button", undefined, "pause");
  pause.onclick = () => api.control("pause");
  const generalize = el("button", undefined, "generalize");
  generalize.onclick = () => api.control("generalize");
  controls.append(step, run, pause, generalize);
  root.append(feed, row, controls);
  return { root };
}

// --- future trees -------------------------------------------------------------------

function treeNodeElement(edge: TreeEdge, depth: number): HTMLElement {
  const hasChildren = (edge.children?.length ?? 0) > 0;
  if (!hasChildren) {
    const leaf = el("div", "tree-leaf");
    leaf.textContent = `--${edgeLabel(edge)}-->${edge.label}` + (edge.elided ? `  …(+${edge.elided})` : "");
    return leaf;
  }
  const details = el("details", "tree-branch") as HTMLDetailsElement;
  details.open = depth > 0;
  const summary = el("summary");
  summary.textContent = `--${edgeLabel(edge)}-->${edge.label}`;
  details.appendChild(summary);
  for (const child of edge.children ?? []) {
    details.appendChild(treeNodeElement(child, depth - 1));
  }
  return details;
}

export function createTreePanel(api: ApiClient) {
  const root = el("div", "panel tree-panel");
  root.appendChild(el("h2", undefined, "Future trees"));
  const activeBox = el("div", "active-trees");
  const lookupRow = el("div", "lookup-row");
  const input = el("input") as HTMLInputElement;
  input.placeholder = "node id, e.g. IMG.1";
  const go = el("button", undefined, "inspect");
  lookupRow.append(input, go);
  const inspected = el("div", "inspected-tree");
  root.append(activeBox, lookupRow, inspected);

  go.onclick = async () => {
    inspected.replaceChildren();
    try {
      const body: TreeResponse = await api.getTree(input.value.trim());
      if (!body.tree) {
        inspected.appendChild(el("div", "tree-empty", "no observation tree"));
        return;
      }
      inspected.appendChild(el("div", "tree-root", body.tree.label));
      for (const child of body.tree.children) {
        inspected.appendChild(treeNodeElement(child, 1));
      }
    } catch (err) {
      inspected.appendChild(el("div", "tree-empty", String(err)));
    }
  };

  const update = (state: StateView) => {
    activeBox.replaceChildren();
    if (state.active_trees.length === 0) {
      activeBox.appendChild(el("div", "tree-empty", "no active predictions"));
    }
    for (const tree of state.active_trees) {
      const details = el("details", "tree-branch") as HTMLDetailsElement;
      details.open = true;
      details.appendChild(
        el("summary", undefined, `anchor ${tree.anchor} (context ${tree.context_depth})`),
      );
      for (const line of tree.lines) {
        details.appendChild(el("div", "tree-leaf", line));
      }
      activeBox.appendChild(details);
    }
  };
  return { root, update };
}

// --- projection canvas ------------------------------------------------------------------

export function createProjectionPanel(api: ApiClient) {
  const root = el("div", "panel projection-panel");
  root.appendChild(el("h2", undefined, "Projection"));
  const frame = el("img", "projection-frame") as HTMLImageElement;
  const caption = el("div", "projection-caption", "no frames yet");
  root.append(frame, caption);
  let frames: { node: string; png: string }[] = [];
  let cursor = 0;
  let timer: number | undefined;

  const refresh = async () => {
    frames = (await api.getFrames()).frames;
    if (frames.length && timer === undefined) {
      timer = window.setInterval(() => {
        cursor = (cursor + 1) % frames.length;
        frame.src = `data:image/png;base64,${frames[cursor].png}`;
        caption.textContent = `${frames[cursor].node} (${cursor + 1}/${frames.length})`;
      }, 400);
    }
    if (!frames.length) caption.textContent = "no frames yet";
  };
  return { root, refresh };
}

// --- knowledge-base browser -----------------------------------------------------------------

function maskOverlay(entry: NodeEntry): HTMLElement {
  // don't-care pixels dim; checked pixels stay bright
  const canvas = el("canvas", "mask-overlay") as HTMLCanvasElement;
  const mask = entry.mask!;
  canvas.width = mask[0].length;
  canvas.height = mask.length;
  const ctx = canvas.getContext("2d")!;
  for (let y = 0; y < mask.length; y++) {
    for (let x = 0; x < mask[y].length; x++) {
      ctx.fillStyle = mask[y][x] ? "rgba(0,0,0,0)" : "rgba(16,16,16,0.75)";
      ctx.fillRect(x, y, 1, 1);
    }
  }
  return canvas;
}

function waveformSketch(samples: number[]): HTMLElement {
  const canvas = el("canvas", "waveform") as HTMLCanvasElement;
  canvas.width = 128;
  canvas.height = 32;
  const ctx = canvas.getContext("2d")!;
  ctx.strokeStyle = "#7ad";
  ctx.beginPath();
  samples.forEach((value, i) => {
    const x = (i / samples.length) * canvas.width;
    const y = canvas.height / 2 - (value / 128) * (canvas.height / 2);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  return canvas;
}

export function createKbPanel(api: ApiClient) {
  const root = el("div", "panel kb-panel");
  root.appendChild(el("h2", undefined, "Knowledge base"));
  const filterRow = el("div", "kb-filter");
  const select = el("select") as HTMLSelectElement;
  for (const type of ["", "IMG", "AUD", "SPK", "IFA", "ATT", "GRP", "SIA", "JMP", "SNS"]) {
    const option = el("option", undefined, type || "all");
    option.value = type;
    select.appendChild(option);
  }
  const refreshButton = el("button", undefined, "refresh");
  filterRow.append(select, refreshButton);
  const list = el("div", "kb-list");
  root.append(filterRow, list);

  const refresh = async () => {
    const { nodes } = await api.getNodes(select.value || undefined);
    list.replaceChildren();
    for (const entry of nodes) {
      const card = el("div", "kb-card");
      const title = el("div", "kb-id", entry.label);
      card.appendChild(title);
      if (entry.thumb_png) {
        const holder = el("div", "kb-thumb-holder");
        const image = el("img", "kb-thumb") as HTMLImageElement;
        image.src = `data:image/png;base64,${entry.thumb_png}`;
        holder.appendChild(image);
        if (entry.mask) holder.appendChild(maskOverlay(entry));
        card.appendChild(holder);
      } else if (entry.waveform) {
        card.appendChild(waveformSketch(entry.waveform));
      }
      card.onclick = () => {
        const input = document.querySelector<HTMLInputElement>(".lookup-row input");
        if (input) input.value = entry.id;
      };
      list.appendChild(card);
    }
  };
  refreshButton.onclick = refresh;
  select.onchange = refresh;
  return { root, refresh };
}

// --- event feed ----------------------------------------------------------------------------

export function createEventFeed() {
  const root = el("div", "panel event-panel");
  root.appendChild(el("h2", undefined, "Events"));
  const feed = el("div", "event-feed");
  root.appendChild(feed);
  const push = (event: AgentEvent) => {
    const line = el("div", `event event-${event.kind}`, describeEvent(event));
    feed.prepend(line);
    while (feed.childElementCount > 200) feed.lastElementChild?.remove();
  };
  return { root, push };
}

export function createBanner() {
  const root = el("div", "banner");
  root.style.display = "none";
  const set = (status: string) => {
    if (status === "open") {
      root.style.display = "none";
    } else {
      root.textContent = status === "connecting" ? "reconnecting to session…" : "stream closed";
      root.style.display = "block";
    }
  };
  return { root, set };
}
