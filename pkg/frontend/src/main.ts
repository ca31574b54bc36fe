import { apiBase, wsBase } from "./config.js";
import { clear, el } from "./dom.js";
import { renderReset, renderVerify } from "./pages/account.js";
import { renderCourier } from "./pages/courier.js";
import { renderLogin } from "./pages/login.js";
import { renderSender } from "./pages/sender.js";
import { renderTracking } from "./pages/tracking.js";
import { Router, buildContext } from "./router.js";

function main(): void {
  const root = document.getElementById("app");
  const nav = document.getElementById("nav-session");
  if (!root || !nav) throw new Error("missing page skeleton");

  const ctx = buildContext(apiBase(), wsBase());
  const router = new Router(root, ctx, new Set(["sender", "courier"]));

  ctx.api.onLoginRequired = () => router.navigate("#/login");

  router.register("login", (r, c) => renderLogin(r, c));
  router.register("sender", (r, c) => renderSender(r, c));
  router.register("courier", (r, c) => renderCourier(r, c));
  router.register("track", (r, c, route) => renderTracking(r, c, route.arg));
  router.register("verify", (r, c, route) => renderVerify(r, c, route.token));
  router.register("reset", (r, c, route) => renderReset(r, c, route.token));

  const renderNav = () => {
    clear(nav);
    if (ctx.session.loggedIn) {
      const logout = el("button", { type: "button", class: "link" }, "Log out");
      logout.addEventListener("click", () => {
        ctx.session.clear(); // purges tokens from local storage
        router.navigate("#/login");
      });
      nav.append(logout);
    } else {
      nav.append(el("a", { href: "#/login" }, "Log in"));
    }
  };
  ctx.session.onChange(renderNav);
  renderNav();

  router.start();
}

main();
