// Wire types for the engine's playground protocol: line-delimited JSON
// messages, one object per line/frame. The engine owns all selection
// logic; the client only sends raw input samples and renders state.

export type Technique = "walkline" | "foottap" | "proximity";

export interface ConfigureMessage {
  type: "configure";
  technique: Technique;
  params: Record<string, unknown>;
}

export interface WalkInputMessage {
  type: "input";
  t: number;
  x: number;
  y: number;
}

export interface TapMessage {
  type: "tap";
  x: number;
  y: number;
}

export interface DistanceMessage {
  type: "distance";
  t: number;
  d: number;
}

export type ClientMessage =
  | ConfigureMessage
  | WalkInputMessage
  | TapMessage
  | DistanceMessage;

export interface EngineEvent {
  kind: string;
  t?: number;
  lane?: number;
  layer?: number;
  technique?: string;
}

export interface StateMessage {
  type: "state";
  active: number | string | null;
  dwell_fraction: number;
  events: EngineEvent[];
}

export interface SelectedMetrics {
  success: boolean;
  tct: number | null;
  walked_distance: number;
  stabilizing_error: boolean;
  error_kind: string | null;
}

export interface SelectedMessage {
  type: "selected";
  target: number;
  metrics: SelectedMetrics;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = StateMessage | SelectedMessage | ErrorMessage;

// A transport hides whether messages travel over a browser WebSocket or a
// raw TCP socket (used by the Node test-suite).
export interface Transport {
  send(message: ClientMessage): void;
  onMessage(handler: (message: ServerMessage) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}
