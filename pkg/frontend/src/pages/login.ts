import { ApiError } from "../api.js";
import { clear, clearErrors, el, fieldError, labeled, textInput } from "../dom.js";
import type { PageContext } from "../router.js";

export function renderLogin(root: HTMLElement, ctx: PageContext): void {
  clear(root);

  const email = textInput("email", "email", "you@example.org");
  const password = textInput("password", "password");
  const status = el("p", { class: "status" });

  const loginForm = el(
    "form",
    { class: "card", id: "login-form" },
    el("h2", {}, "Log in"),
    labeled("email", "Email", email),
    labeled("password", "Password", password),
    el("button", { type: "submit" }, "Log in"),
    status,
  );
  loginForm.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    clearErrors(loginForm);
    status.textContent = "";
    try {
      const pair = await ctx.api.login(email.value, password.value);
      ctx.session.setTokens(pair);
      ctx.navigate("#/sender");
    } catch (err) {
      status.textContent = err instanceof ApiError ? err.body.message : String(err);
    }
  });

  const rEmail = textInput("r_email", "email");
  const rPassword = textInput("r_password", "password");
  const rFirst = textInput("r_first");
  const rLast = textInput("r_last");
  const rPhone = textInput("r_phone", "tel");
  const rStatus = el("p", { class: "status" });

  const registerForm = el(
    "form",
    { class: "card", id: "register-form" },
    el("h2", {}, "Create an account"),
    labeled("r_first", "First name", rFirst),
    labeled("r_last", "Last name", rLast),
    labeled("r_email", "Email", rEmail),
    labeled("r_phone", "Phone (optional)", rPhone),
    labeled("r_password", "Password (8+ characters)", rPassword),
    el("button", { type: "submit" }, "Register"),
    rStatus,
  );
  registerForm.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    clearErrors(registerForm);
    rStatus.textContent = "";
    // Inline checks before the request goes out.
    let bad = false;
    if (!/^[^@\s]+@[^@\s]+\.[^@\s]+$/.test(rEmail.value)) {
      fieldError(registerForm, "r_email", "enter a valid email address");
      bad = true;
    }
    if (rPassword.value.length < 8) {
      fieldError(registerForm, "r_password", "at least 8 characters");
      bad = true;
    }
    if (!rFirst.value.trim()) {
      fieldError(registerForm, "r_first", "required");
      bad = true;
    }
    if (bad) return;
    try {
      await ctx.api.register({
        email: rEmail.value,
        password: rPassword.value,
        first_name: rFirst.value,
        last_name: rLast.value,
        phone: rPhone.value || null,
      });
      rStatus.textContent = "Registered. Check your inbox for the verification link, then log in.";
    } catch (err) {
      if (err instanceof ApiError && err.body.fields) {
        for (const [name, msg] of Object.entries(err.body.fields)) {
          fieldError(registerForm, `r_${name}`, msg);
        }
      }
      rStatus.textContent = err instanceof ApiError ? err.body.message : String(err);
    }
  });

  root.append(
    el("div", { class: "two-col" }, loginForm, registerForm),
    el(
      "p",
      { class: "hint" },
      "Forgot your password? ",
      linkToReset(ctx),
      " — or just track a parcel from the Tracking tab, no account needed.",
    ),
  );
}

function linkToReset(ctx: PageContext): HTMLElement {
  const a = el("a", { href: "#/reset" }, "Request a reset link");
  return a;
}
