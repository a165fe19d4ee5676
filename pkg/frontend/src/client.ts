import type {
  ClientMessage,
  EngineEvent,
  SelectedMessage,
  ServerMessage,
  Technique,
  Transport,
} from "./protocol.js";

const EVENT_TICKER_LIMIT = 50;

export interface SessionView {
  technique: Technique | null;
  params: Record<string, unknown>;
  connected: boolean;
  configured: boolean;
  active: number | string | null;
  dwellFraction: number;
  ticker: EngineEvent[];
  selected: SelectedMessage | null;
  error: string | null;
}

export type ViewListener = (view: SessionView, message: ServerMessage | null) => void;

/** One live engine session.
 *
 * Mirrors the most recent server state into `view`; never decides
 * selections itself. Unknown server message types are logged and ignored
 * so protocol growth cannot crash the console.
 */
export class PlaygroundSession {
  readonly view: SessionView = {
    technique: null,
    params: {},
    connected: true,
    configured: false,
    active: null,
    dwellFraction: 0,
    ticker: [],
    selected: null,
    error: null,
  };

  private listeners: ViewListener[] = [];

  constructor(private transport: Transport) {
    transport.onMessage((message) => this.handle(message));
    transport.onClose(() => {
      this.view.connected = false;
      this.notify(null);
    });
  }

  subscribe(listener: ViewListener): void {
    this.listeners.push(listener);
  }

  /** Configure (or reconfigure) the session; any running trial restarts. */
  configure(technique: Technique, params: Record<string, unknown>): void {
    this.view.technique = technique;
    this.view.params = { ...params };
    this.view.configured = false;
    this.view.active = null;
    this.view.dwellFraction = 0;
    this.view.selected = null;
    this.view.error = null;
    this.send({ type: "configure", technique, params });
  }

  sendWalkSample(t: number, x: number, y: number): void {
    this.send({ type: "input", t, x, y });
  }

  sendTap(x: number, y: number): void {
    this.send({ type: "tap", x, y });
  }

  sendDistance(t: number, d: number): void {
    this.send({ type: "distance", t, d });
  }

  close(): void {
    this.transport.close();
  }

  private send(message: ClientMessage): void {
    this.transport.send(message);
  }

  private handle(message: ServerMessage): void {
    switch (message.type) {
      case "state":
        this.view.configured = true;
        this.view.active = message.active;
        this.view.dwellFraction = message.dwell_fraction;
        this.view.ticker.push(...message.events);
        if (this.view.ticker.length > EVENT_TICKER_LIMIT) {
          this.view.ticker.splice(0, this.view.ticker.length - EVENT_TICKER_LIMIT);
        }
        break;
      case "selected":
        this.view.selected = message;
        break;
      case "error":
        this.view.error = message.message;
        break;
      default:
        console.warn("unknown server message type", (message as { type?: string }).type);
        return;
    }
    this.notify(message);
  }

  private notify(message: ServerMessage | null): void {
    for (const listener of this.listeners) {
      listener(this.view, message);
    }
  }
}
