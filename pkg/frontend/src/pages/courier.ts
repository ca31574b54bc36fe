import { ApiError } from "../api.js";
import { clear, el, labeled, textInput } from "../dom.js";
import { CanvasMap } from "../map.js";
import type { PageContext } from "../router.js";
import { STATE_LABELS, nextStates } from "../transitions.js";
import { LocationSharer, deliveryChannelUrl } from "../ws.js";

interface DeliveryView {
  tracking_code: string;
  state: string;
  item: { weight_class: string; fragile: boolean };
  source: { address_text: string; lat: number; lon: number };
  destination: { address_text: string; lat: number; lon: number };
  route_distance_m: number;
}

const REFRESH_MS = 5000;

export function renderCourier(root: HTMLElement, ctx: PageContext): void {
  clear(root);
  void (async () => {
    const me = (await ctx.api.me()) as { courier?: unknown };
    if (!me.courier) renderEnroll(root, ctx);
    else renderBoard(root, ctx);
  })().catch(() => renderEnroll(root, ctx));
}

function renderEnroll(root: HTMLElement, ctx: PageContext): void {
  clear(root);
  const vehicle = el("select", { id: "vehicle_class", name: "vehicle_class" },
    el("option", { value: "small" }, "small"),
    el("option", { value: "medium" }, "medium"),
    el("option", { value: "large" }, "large"),
  );
  const status = el("p", { class: "status" });
  const form = el(
    "form",
    { class: "card", id: "courier-enroll" },
    el("h2", {}, "Become a courier"),
    el("p", {}, "Pick the vehicle you deliver with; parcels near your position will be offered to you."),
    labeled("vehicle_class", "Vehicle", vehicle),
    el("button", { type: "submit" }, "Register as courier"),
    status,
  );
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    try {
      await ctx.api.registerCourier((vehicle as HTMLSelectElement).value);
      renderBoard(root, ctx);
    } catch (err) {
      status.textContent = err instanceof ApiError ? err.body.message : String(err);
    }
  });
  root.append(form);
}

function renderBoard(root: HTMLElement, ctx: PageContext): void {
  clear(root);

  const latInput = textInput("my_lat", "number");
  const lonInput = textInput("my_lon", "number");
  latInput.value = "48.1486";
  lonInput.value = "17.1077";
  const locateBtn = el("button", { type: "button", id: "use-geolocation" }, "Use my location");
  const positionCard = el(
    "div",
    { class: "card" },
    el("h2", {}, "My position"),
    el("div", { class: "grid3" },
      labeled("my_lat", "Latitude", latInput),
      labeled("my_lon", "Longitude", lonInput),
      el("div", { class: "field" }, locateBtn),
    ),
    el("p", { class: "hint" }, "Or click the map below while sharing to move manually."),
  );
  locateBtn.addEventListener("click", () => {
    navigator.geolocation?.getCurrentPosition((pos) => {
      latInput.value = String(pos.coords.latitude);
      lonInput.value = String(pos.coords.longitude);
    });
  });

  const listCard = el("div", { class: "card" }, el("h2", {}, "Closest ready parcels"));
  const activeCard = el("div", { class: "card", id: "active-delivery" }, el("h2", {}, "Active delivery"));
  const canvas = el("canvas", { width: "640", height: "320", id: "courier-map" });
  const mapCard = el("div", { class: "card" }, el("h2", {}, "Map"), canvas);
  root.append(positionCard, el("div", { class: "two-col" }, listCard, activeCard), mapCard);

  const map = new CanvasMap(canvas);
  map.draw();

  const sharer = new LocationSharer(() => current.position);
  const current: {
    position: { lat: number; lon: number } | null;
    delivery: DeliveryView | null;
    timer: ReturnType<typeof setInterval> | null;
  } = {
    position: { lat: Number(latInput.value), lon: Number(lonInput.value) },
    delivery: null,
    timer: null,
  };
  const syncPosition = () => {
    current.position = { lat: Number(latInput.value), lon: Number(lonInput.value) };
  };
  latInput.addEventListener("change", syncPosition);
  lonInput.addEventListener("change", syncPosition);
  map.onClick((p) => {
    latInput.value = p.lat.toFixed(6);
    lonInput.value = p.lon.toFixed(6);
    syncPosition();
    map.addPoint(p);
  });

  const refresh = async () => {
    syncPosition();
    if (!current.position || current.delivery) return;
    try {
      const items = (await ctx.api.closestDeliveries(
        current.position.lat, current.position.lon, 10,
      )) as DeliveryView[];
      renderList(items);
    } catch {
      // transient; next tick retries
    }
  };

  const renderList = (items: DeliveryView[]) => {
    clear(listCard);
    listCard.append(el("h2", {}, "Closest ready parcels"));
    if (!items.length) {
      listCard.append(el("p", { class: "empty" }, "Nothing nearby right now."));
      return;
    }
    map.setMarkers(items.map((d) => ({ lat: d.source.lat, lon: d.source.lon })));
    const list = el("ul", { class: "item-list" });
    for (const d of items) {
      const accept = el("button", { type: "button" }, "Accept");
      accept.addEventListener("click", async () => {
        try {
          await ctx.api.changeState(d.tracking_code, "assigned");
          current.delivery = { ...d, state: "assigned" };
          renderActive();
        } catch (err) {
          if (err instanceof ApiError && err.status === 409) {
            // Lost the race: someone else took it; refresh the board.
            await refresh();
          }
        }
      });
      list.append(
        el("li", {},
          el("strong", {}, d.tracking_code),
          el("span", {}, ` ${(d.route_distance_m / 1000).toFixed(1)} km, ${d.item.weight_class}`),
          el("span", {}, ` ${d.source.address_text} → ${d.destination.address_text} `),
          accept,
        ),
      );
    }
    listCard.append(list);
  };

  const renderActive = () => {
    clear(activeCard);
    activeCard.append(el("h2", {}, "Active delivery"));
    const d = current.delivery;
    if (!d) {
      activeCard.append(el("p", { class: "empty" }, "Accept a parcel to start."));
      sharer.stop();
      return;
    }
    activeCard.append(
      el("p", {}, el("strong", {}, d.tracking_code), ` — ${d.state}`),
      el("p", {}, `${d.source.address_text} → ${d.destination.address_text}`),
    );

    const sharing = el("p", { class: "hint" },
      sharer.active ? "Sharing position every 4 s." : "Position sharing off.");
    activeCard.append(sharing);

    // Offer exactly the transitions the state machine allows from here.
    const buttons = el("div", { class: "actions" });
    for (const target of nextStates(d.state)) {
      if (target === "assigned") continue; // accept happens from the list
      const btn = el("button", { type: "button", "data-state": target }, STATE_LABELS[target] ?? target);
      btn.addEventListener("click", async () => {
        try {
          const updated = (await ctx.api.changeState(d.tracking_code, target)) as DeliveryView;
          current.delivery = updated.state === "ready" ? null : updated;
          if (updated.state === "delivering") startSharing(d.tracking_code);
          if (["delivered", "undeliverable", "ready"].includes(updated.state)) sharer.stop();
          renderActive();
          if (!current.delivery) await refresh();
        } catch {
          // surface-level page; errors leave the board unchanged
        }
      });
      buttons.append(btn);
    }
    if (!buttons.childElementCount) {
      activeCard.append(el("p", { class: "empty" }, "Done. Pick the next parcel."));
      current.delivery = null;
    }
    activeCard.append(buttons);
  };

  const startSharing = (code: string) => {
    const token = ctx.session.tokens?.access_token;
    if (!token) return;
    sharer.start(deliveryChannelUrl(ctx.wsBase, code, token), (frame) => {
      if ("lat" in frame) map.addPoint({ lat: frame.lat, lon: frame.lon });
    });
  };

  current.timer = setInterval(() => void refresh(), REFRESH_MS);
  ctx.onLeave(() => {
    if (current.timer) clearInterval(current.timer);
    sharer.stop();
  });
  renderActive();
  void refresh();
}
