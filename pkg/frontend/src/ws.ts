// Websocket plumbing: subscribing to delivery/global channels and the
// courier-side location publisher with its fixed 4-second cadence.

export interface LocationFrame {
  delivery_id: string;
  courier_id: string;
  lat: number;
  lon: number;
  ts: string;
}

export interface ErrorFrame {
  error: { code: string; message?: string };
}

export type WebSocketLike = Pick<WebSocket, "send" | "close"> & {
  onmessage: ((ev: MessageEvent) => void) | null;
  onclose: ((ev: CloseEvent) => void) | null;
  onerror: ((ev: Event) => void) | null;
};

export type SocketFactory = (url: string) => WebSocketLike;

export const defaultSocketFactory: SocketFactory = (url) => new WebSocket(url);

export function deliveryChannelUrl(wsBase: string, code: string, token?: string): string {
  const suffix = token ? `?token=${encodeURIComponent(token)}` : "";
  return `${wsBase}/ws/deliveries/${encodeURIComponent(code)}/${suffix}`;
}

export function globalChannelUrl(wsBase: string): string {
  return `${wsBase}/ws/couriers/`;
}

export function subscribe(
  url: string,
  onFrame: (frame: LocationFrame) => void,
  onError: (code: string) => void = () => {},
  factory: SocketFactory = defaultSocketFactory,
): () => void {
  const socket = factory(url);
  socket.onmessage = (ev) => {
    const data = JSON.parse(String(ev.data));
    if (data.error) onError(data.error.code);
    else onFrame(data as LocationFrame);
  };
  return () => socket.close();
}

export const PUBLISH_INTERVAL_MS = 4000;

/**
 * Publishes the courier position on a fixed 4 s cadence while sharing is
 * active: one frame every interval tick, nothing in between. The position
 * source is polled at send time (browser geolocation, or the manual map
 * position the page keeps).
 */
export class LocationSharer {
  private timer: ReturnType<typeof setInterval> | null = null;
  private socket: WebSocketLike | null = null;
  framesSent = 0;

  constructor(
    private getPosition: () => { lat: number; lon: number } | null,
    private factory: SocketFactory = defaultSocketFactory,
  ) {}

  get active(): boolean {
    return this.timer !== null;
  }

  start(url: string, onServerFrame: (frame: LocationFrame | ErrorFrame) => void = () => {}): void {
    this.stop();
    this.socket = this.factory(url);
    this.socket.onmessage = (ev) => onServerFrame(JSON.parse(String(ev.data)));
    this.socket.onclose = () => this.stop();
    this.timer = setInterval(() => this.tick(), PUBLISH_INTERVAL_MS);
  }

  private tick(): void {
    const position = this.getPosition();
    if (!position || !this.socket) return;
    this.socket.send(JSON.stringify({ lat: position.lat, lon: position.lon }));
    this.framesSent += 1;
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    if (this.socket) {
      const socket = this.socket;
      this.socket = null;
      socket.onclose = null;
      socket.close();
    }
  }
}
