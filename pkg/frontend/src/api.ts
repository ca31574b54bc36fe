// Fetch wrapper implementing the token protocol: access token on every
// request; on a 401 token_expired response the renew route is called once,
// both tokens are replaced, and the original request is replayed exactly
// once. If the renew itself fails the session is cleared and the caller is
// routed to login. Any other error passes straight through.

import { Session, TokenPair } from "./session.js";

export interface ApiErrorBody {
  code: string;
  message: string;
  fields?: Record<string, string>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface RequestOptions {
  json?: unknown;
  form?: FormData;
  basic?: { email: string; password: string };
  query?: Record<string, string | number | undefined>;
}

export class ApiClient {
  onLoginRequired: () => void = () => {};

  constructor(
    private base: string,
    private session: Session,
    private fetchFn: FetchLike = (input, init) => window.fetch(input, init),
  ) {}

  async request(method: string, path: string, opts: RequestOptions = {}): Promise<unknown> {
    const first = await this.send(method, path, opts);
    if (first.status !== 401) return this.finish(first);

    const body = await this.errorBody(first);
    if (body.code !== "token_expired" || !this.session.tokens) {
      throw new ApiError(first.status, body);
    }

    // Expired access token: renew once, then replay once.
    let pair: TokenPair;
    try {
      pair = await this.renew(this.session.tokens.renew_token);
    } catch (err) {
      this.session.clear();
      this.onLoginRequired();
      throw err;
    }
    this.session.setTokens(pair);
    return this.finish(await this.send(method, path, opts));
  }

  private async renew(renewToken: string): Promise<TokenPair> {
    const response = await this.fetchFn(`${this.base}/api/accounts/token/renew/`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ renew_token: renewToken }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await this.errorBody(response));
    }
    return (await response.json()) as TokenPair;
  }

  private async send(method: string, path: string, opts: RequestOptions): Promise<Response> {
    const headers: Record<string, string> = {};
    let body: BodyInit | undefined;
    if (opts.json !== undefined) {
      headers["Content-Type"] = "application/json";
      body = JSON.stringify(opts.json);
    } else if (opts.form) {
      body = opts.form; // browser sets the multipart boundary
    }
    if (opts.basic) {
      headers["Authorization"] = `Basic ${btoa(`${opts.basic.email}:${opts.basic.password}`)}`;
    } else if (this.session.tokens) {
      headers["Authorization"] = `Bearer ${this.session.tokens.access_token}`;
    }
    let url = `${this.base}${path}`;
    if (opts.query) {
      const params = new URLSearchParams();
      for (const [key, value] of Object.entries(opts.query)) {
        if (value !== undefined) params.set(key, String(value));
      }
      const qs = params.toString();
      if (qs) url += `?${qs}`;
    }
    return this.fetchFn(url, { method, headers, body });
  }

  private async finish(response: Response): Promise<unknown> {
    if (response.ok) return response.json();
    throw new ApiError(response.status, await this.errorBody(response));
  }

  private async errorBody(response: Response): Promise<ApiErrorBody> {
    try {
      const parsed = (await response.json()) as { error?: ApiErrorBody };
      if (parsed.error?.code) return parsed.error;
    } catch {
      // non-JSON error: synthesize an envelope
    }
    return { code: "http_error", message: `HTTP ${response.status}` };
  }

  // -- typed helpers -------------------------------------------------------

  login(email: string, password: string): Promise<TokenPair> {
    return this.request("GET", "/api/accounts/token/", { basic: { email, password } }) as Promise<TokenPair>;
  }

  register(fields: Record<string, unknown>): Promise<unknown> {
    return this.request("POST", "/api/accounts/", { json: fields });
  }

  me(): Promise<unknown> {
    return this.request("GET", "/api/accounts/me/");
  }

  track(code: string): Promise<unknown> {
    return this.request("GET", `/api/deliveries/${encodeURIComponent(code)}/`);
  }

  history(direction: "sent" | "received"): Promise<unknown> {
    return this.request("GET", "/api/deliveries/", { query: { direction } });
  }

  statistics(months = 5): Promise<unknown> {
    return this.request("GET", "/api/deliveries/statistics/", { query: { months } });
  }

  createDelivery(payload: unknown, picture: File | null): Promise<unknown> {
    const form = new FormData();
    form.set("payload", JSON.stringify(payload));
    if (picture) form.set("picture", picture);
    return this.request("POST", "/api/deliveries/", { form });
  }

  registerCourier(vehicleClass: string): Promise<unknown> {
    return this.request("POST", "/api/couriers/", { json: { vehicle_class: vehicleClass } });
  }

  closestDeliveries(lat: number, lon: number, limit = 10): Promise<unknown> {
    return this.request("GET", "/api/couriers/closest_delivery/", { query: { lat, lon, limit } });
  }

  changeState(code: string, state: string, note?: string): Promise<unknown> {
    return this.request("POST", `/api/deliveries/${encodeURIComponent(code)}/state/`, {
      json: note ? { state, note } : { state },
    });
  }

  verifyEmail(token: string): Promise<unknown> {
    return this.request("POST", "/api/accounts/verification_email/", { json: { token } });
  }

  requestReset(email: string): Promise<unknown> {
    return this.request("POST", "/api/accounts/reset_password/", { json: { email } });
  }

  confirmReset(token: string, newPassword: string): Promise<unknown> {
    return this.request("POST", "/api/accounts/reset_password/confirm/", {
      json: { token, new_password: newPassword },
    });
  }
}
