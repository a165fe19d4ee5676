import type { ClientMessage, ServerMessage, Transport } from "./protocol.js";

/** Browser transport: one JSON message per WebSocket text frame. */
export class WebSocketTransport implements Transport {
  private socket: WebSocket;
  private messageHandler: ((message: ServerMessage) => void) | null = null;
  private closeHandler: (() => void) | null = null;
  private queue: string[] = [];

  constructor(url: string, onError?: (detail: string) => void) {
    this.socket = new WebSocket(url);
    this.socket.addEventListener("open", () => {
      for (const line of this.queue.splice(0)) {
        this.socket.send(line);
      }
    });
    this.socket.addEventListener("message", (event) => {
      if (this.messageHandler) {
        this.messageHandler(JSON.parse(String(event.data)) as ServerMessage);
      }
    });
    this.socket.addEventListener("close", () => {
      if (this.closeHandler) this.closeHandler();
    });
    this.socket.addEventListener("error", () => {
      if (onError) onError(`connection to ${url} failed`);
    });
  }

  send(message: ClientMessage): void {
    const line = JSON.stringify(message);
    if (this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(line);
    } else {
      this.queue.push(line);
    }
  }

  onMessage(handler: (message: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.socket.close();
  }
}
