// Hash router: #/login, #/sender, #/courier, #/track[/CODE],
// #/verify?token=..., #/reset[?token=...]. Pages register teardown
// callbacks via ctx.onLeave (timers, sockets) which run on navigation.

import { ApiClient } from "./api.js";
import { Session } from "./session.js";
import { SocketFactory, defaultSocketFactory } from "./ws.js";

export interface PageContext {
  api: ApiClient;
  session: Session;
  wsBase: string;
  navigate: (hash: string) => void;
  onLeave: (fn: () => void) => void;
  socketFactory: SocketFactory;
}

export interface Route {
  page: string;
  arg?: string;
  token?: string;
}

export function parseHash(hash: string): Route {
  const raw = hash.replace(/^#\/?/, "");
  const [pathPart, queryPart] = raw.split("?");
  const segments = pathPart.split("/").filter(Boolean);
  const params = new URLSearchParams(queryPart ?? "");
  return {
    page: segments[0] || "track",
    arg: segments[1],
    token: params.get("token") ?? undefined,
  };
}

type PageRenderer = (root: HTMLElement, ctx: PageContext, route: Route) => void;

export class Router {
  private teardowns: Array<() => void> = [];
  private pages = new Map<string, PageRenderer>();

  constructor(
    private root: HTMLElement,
    private ctxBase: Omit<PageContext, "onLeave" | "navigate">,
    private requireLogin: Set<string>,
  ) {}

  register(page: string, renderer: PageRenderer): void {
    this.pages.set(page, renderer);
  }

  navigate = (hash: string): void => {
    if (window.location.hash === hash) this.render();
    else window.location.hash = hash;
  };

  render = (): void => {
    for (const fn of this.teardowns.splice(0)) {
      try {
        fn();
      } catch {
        // teardown is best-effort
      }
    }
    const route = parseHash(window.location.hash);
    let page = this.pages.has(route.page) ? route.page : "track";
    if (this.requireLogin.has(page) && !this.ctxBase.session.loggedIn) {
      page = "login";
    }
    const ctx: PageContext = {
      ...this.ctxBase,
      navigate: this.navigate,
      onLeave: (fn) => this.teardowns.push(fn),
    };
    this.pages.get(page)!(this.root, ctx, route);
    this.markActiveNav(page);
  };

  private markActiveNav(page: string): void {
    document.querySelectorAll("nav a[data-page]").forEach((a) => {
      a.classList.toggle("active", a.getAttribute("data-page") === page);
    });
  }

  start(): void {
    window.addEventListener("hashchange", this.render);
    this.render();
  }
}

export function buildContext(apiBaseUrl: string, wsBaseUrl: string): Omit<PageContext, "onLeave" | "navigate"> {
  const session = new Session();
  const api = new ApiClient(apiBaseUrl, session);
  return { api, session, wsBase: wsBaseUrl, socketFactory: defaultSocketFactory };
}
