import { ApiError } from "../api.js";
import { clear, el, labeled, textInput } from "../dom.js";
import { CanvasMap } from "../map.js";
import type { PageContext } from "../router.js";
import { LocationFrame, deliveryChannelUrl, subscribe } from "../ws.js";

interface TrackingView {
  tracking_code: string;
  state: string;
  source_address: string;
  destination_address: string;
  item: { width_cm: number; height_cm: number; depth_cm: number; weight_class: string; fragile: boolean };
  expected_delivery_time: string;
  courier_position?: { lat: number; lon: number; ts: string };
  receiver?: { first_name: string; last_name: string; email: string };
}

export function renderTracking(root: HTMLElement, ctx: PageContext, code?: string): void {
  clear(root);
  const input = textInput("tracking_code");
  input.value = code ?? "";
  const status = el("p", { class: "status" });
  const form = el(
    "form",
    { class: "card", id: "tracking-form" },
    el("h2", {}, "Track a parcel"),
    el("p", {}, "No account needed — just the tracking code from the email."),
    labeled("tracking_code", "Tracking code", input),
    el("button", { type: "submit" }, "Track"),
    status,
  );
  const result = el("div", { id: "tracking-result" });
  root.append(form, result);

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const value = input.value.trim().toUpperCase();
    if (value) ctx.navigate(`#/track/${value}`);
  });

  if (code) void loadAndRender(ctx, code, result, status);
}

async function loadAndRender(ctx: PageContext, code: string, result: HTMLElement, status: HTMLElement): Promise<void> {
  let view: TrackingView;
  try {
    view = (await ctx.api.track(code)) as TrackingView;
  } catch (err) {
    status.textContent =
      err instanceof ApiError && err.status === 404
        ? "No parcel with that code."
        : String(err);
    return;
  }
  renderView(ctx, view, result);
}

function renderView(ctx: PageContext, view: TrackingView, result: HTMLElement): void {
  clear(result);
  const eta = new Date(view.expected_delivery_time);
  const details = el(
    "div",
    { class: "card", id: "tracking-details" },
    el("h2", {}, view.tracking_code),
    el("p", {}, el("span", { class: `state state-${view.state}`, id: "tracking-state" }, view.state)),
    el("p", {}, `${view.source_address} → ${view.destination_address}`),
    el("p", {}, `Parcel: ${view.item.width_cm}×${view.item.height_cm}×${view.item.depth_cm} cm, `
      + `${view.item.weight_class}${view.item.fragile ? ", fragile" : ""}`),
    el("p", { id: "tracking-eta" }, `Expected by ${eta.toLocaleString()}`),
  );
  if (view.receiver) {
    details.append(
      el("p", { id: "tracking-receiver" },
        `For: ${view.receiver.first_name} ${view.receiver.last_name} (${view.receiver.email})`),
    );
  }
  const positions = el("ul", { class: "item-list", id: "position-log" });
  const canvas = el("canvas", { width: "640", height: "320", id: "tracking-map" });
  const live = el(
    "div",
    { class: "card" },
    el("h2", {}, "Live position"),
    canvas,
    positions,
  );
  result.append(details, live);

  const map = new CanvasMap(canvas);
  map.draw();
  if (view.courier_position) {
    map.addPoint(view.courier_position);
    appendPosition(positions, view.courier_position.lat, view.courier_position.lon, view.courier_position.ts);
  }

  const close = subscribe(
    deliveryChannelUrl(ctx.wsBase, view.tracking_code),
    (frame: LocationFrame) => {
      map.addPoint(frame);
      appendPosition(positions, frame.lat, frame.lon, frame.ts);
      const state = document.getElementById("tracking-state");
      if (state && state.textContent === "ready") state.textContent = "delivering";
    },
    () => {},
    ctx.socketFactory,
  );
  ctx.onLeave(close);
}

export function appendPosition(list: HTMLElement, lat: number, lon: number, ts: string): void {
  const entry = el(
    "li",
    { class: "position-entry" },
    `${new Date(ts).toLocaleTimeString()} — ${lat.toFixed(5)}, ${lon.toFixed(5)}`,
  );
  list.prepend(entry);
  while (list.childElementCount > 20) list.removeChild(list.lastChild as Node);
}
