import { ApiError } from "../api.js";
import { clear, el, labeled, textInput } from "../dom.js";
import type { PageContext } from "../router.js";

// Targets of the emailed links: #/verify?token=... and #/reset?token=...

export function renderVerify(root: HTMLElement, ctx: PageContext, token?: string): void {
  clear(root);
  const card = el("div", { class: "card" }, el("h2", {}, "Email verification"));
  root.append(card);
  if (!token) {
    card.append(el("p", {}, "Missing verification token. Follow the link from your email."));
    return;
  }
  const status = el("p", { class: "status" }, "Verifying…");
  card.append(status);
  ctx.api
    .verifyEmail(token)
    .then(() => {
      status.textContent = "Account verified. You can log in now.";
      status.classList.add("ok");
      card.append(el("a", { href: "#/login" }, "Go to login"));
    })
    .catch((err) => {
      status.textContent = err instanceof ApiError ? err.body.message : String(err);
    });
}

export function renderReset(root: HTMLElement, ctx: PageContext, token?: string): void {
  clear(root);
  if (!token) {
    // Step one: ask for the email; the reset link arrives by mail.
    const email = textInput("reset_email", "email");
    const status = el("p", { class: "status" });
    const form = el(
      "form",
      { class: "card" },
      el("h2", {}, "Reset password"),
      labeled("reset_email", "Account email", email),
      el("button", { type: "submit" }, "Send reset link"),
      status,
    );
    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      await ctx.api.requestReset(email.value).catch(() => {});
      status.textContent = "If that address has an account, a reset link is on its way.";
    });
    root.append(form);
    return;
  }
  // Step two (from the emailed link): choose the new password.
  const password = textInput("new_password", "password");
  const status = el("p", { class: "status" });
  const form = el(
    "form",
    { class: "card" },
    el("h2", {}, "Choose a new password"),
    labeled("new_password", "New password (8+ characters)", password),
    el("button", { type: "submit" }, "Set password"),
    status,
  );
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    if (password.value.length < 8) {
      status.textContent = "Password must be at least 8 characters.";
      return;
    }
    try {
      await ctx.api.confirmReset(token, password.value);
      status.textContent = "Password changed. Log in with the new one.";
      status.classList.add("ok");
      form.append(el("a", { href: "#/login" }, "Go to login"));
    } catch (err) {
      status.textContent = err instanceof ApiError ? err.body.message : String(err);
    }
  });
  root.append(form);
}
