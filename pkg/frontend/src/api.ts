// Typed client for the session API. Every user gesture in the UI maps to
// exactly one of these calls.

export interface TreeEdge {
  node: string;
  label: string;
  probability: number;
  delta: number;
  count: number;
  children?: TreeEdge[];
  elided?: number;
}

export interface TreeResponse {
  id: string;
  text: string;
  tree: { root: string; label: string; children: TreeEdge[] } | null;
}

export interface ActiveTreeView {
  anchor: string;
  context_depth: number;
  lines: string[];
}

export interface StateView {
  tick: number;
  attention: string;
  visual_focus: number[];
  p_net: number;
  senses: Record<string, number>;
  happiness: number;
  active_trees: ActiveTreeView[];
  offline: boolean;
  trace_length: number;
  node_count: number;
}

export interface NodeEntry {
  id: string;
  label: string;
  type: string;
  merged: boolean;
  created_at: number;
  thumb_png?: string;
  mask?: number[][];
  waveform?: number[];
  summary?: Record<string, number>;
}

export interface AgentEvent {
  tick: number;
  seq: number;
  kind: string;
  data: Record<string, unknown>;
}

export interface FrameEntry {
  index: number;
  node: string;
  png: string;
}

export class ApiClient {
  constructor(public baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      throw new Error(`${path}: ${response.status} ${await response.text()}`);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getState(): Promise<StateView> {
    return this.request<StateView>("/state");
  }

  getLibrary(): Promise<{ images: string[]; audio: string[] }> {
    return this.request("/library");
  }

  getTokenWav(name: string): Promise<{ name: string; wav_base64: string }> {
    return this.request(`/library/audio/${encodeURIComponent(name)}`);
  }

  getNodes(type?: string): Promise<{ nodes: NodeEntry[] }> {
    const query = type ? `?type=${encodeURIComponent(type)}` : "";
    return this.request(`/kb/nodes${query}`);
  }

  getTree(id: string, depth = 4): Promise<TreeResponse> {
    return this.request(`/kb/tree/${encodeURIComponent(id)}?depth=${depth}`);
  }

  getFrames(): Promise<{ frames: FrameEntry[] }> {
    return this.request("/projection/frames");
  }

  presentImage(name: string, hold: number): Promise<unknown> {
    return this.post("/stimulus/image", { name, hold });
  }

  uploadImage(name: string, pngBase64: string, hold: number): Promise<unknown> {
    return this.post("/stimulus/image", { store_as: name, png_base64: pngBase64, hold });
  }

  playAudio(name: string, dur = 1): Promise<unknown> {
    return this.post("/stimulus/audio", { name, dur });
  }

  feed(): Promise<unknown> {
    return this.post("/reward", { feed: true });
  }

  comfort(delta: number): Promise<unknown> {
    return this.post("/reward", { comfort_delta: delta });
  }

  control(op: string, extra: Record<string, unknown> = {}): Promise<unknown> {
    return this.post("/control", { op, ...extra });
  }

  eventStreamUrl(since = -1): string {
    return `${this.baseUrl}/events?since=${since}`;
  }
}

// SSE payload extraction, shared by the live stream and the tests.
export function parseSseChunk(chunk: string): AgentEvent[] {
  const events: AgentEvent[] = [];
  for (const line of chunk.split("\n")) {
    if (!line.startsWith("data: ")) continue;
    try {
      events.push(JSON.parse(line.slice(6)) as AgentEvent);
    } catch {
      // partial line; the caller buffers and retries
    }
  }
  return events;
}

export type StreamStatus = "connecting" | "open" | "closed";

// Persistent event stream with automatic reconnection. EventSource already
// reconnects, but surfacing the status lets the UI show a banner.
export class EventStream {
  private source: EventSource | null = null;
  lastSeq = -1;

  constructor(
    private api: ApiClient,
    private onEvent: (event: AgentEvent) => void,
    private onStatus: (status: StreamStatus) => void = () => {},
  ) {}

  connect(): void {
    this.close();
    this.onStatus("connecting");
    this.source = new EventSource(this.api.eventStreamUrl(this.lastSeq));
    this.source.onopen = () => this.onStatus("open");
    this.source.onmessage = (message) => {
      const event = JSON.parse(message.data) as AgentEvent;
      this.lastSeq = Math.max(this.lastSeq, event.seq);
      this.onEvent(event);
    };
    this.source.onerror = () => {
      // EventSource retries on its own; reflect the gap in the UI
      this.onStatus("connecting");
    };
  }

  close(): void {
    if (this.source) {
      this.source.close();
      this.source = null;
      this.onStatus("closed");
    }
  }
}
