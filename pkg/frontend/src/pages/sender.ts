import { ApiError } from "../api.js";
import { clear, clearErrors, el, fieldError, labeled, textInput } from "../dom.js";
import type { PageContext } from "../router.js";

interface HistoryEntry {
  tracking_code: string;
  state: string;
  expected_delivery_time: string;
  destination: { address_text: string };
  receiver?: { email: string };
}

interface Statistics {
  window: string[];
  months: Record<string, number>;
  total: number;
}

const ACTIVE_STATES = new Set(["ready", "assigned", "delivering"]);

export function renderSender(root: HTMLElement, ctx: PageContext): void {
  clear(root);
  const createCard = buildCreateForm(ctx);
  const itemsCard = el("div", { class: "card", id: "my-items" }, el("h2", {}, "My items"));
  const statsCard = el("div", { class: "card", id: "statistics" }, el("h2", {}, "Statistics"));
  root.append(createCard, el("div", { class: "two-col" }, itemsCard, statsCard));

  void refreshItems(ctx, itemsCard);
  void refreshStats(ctx, statsCard);
  createCard.addEventListener("delivery-created", () => {
    void refreshItems(ctx, itemsCard);
    void refreshStats(ctx, statsCard);
  });
}

function buildCreateForm(ctx: PageContext): HTMLElement {
  const width = textInput("width_cm", "number");
  const height = textInput("height_cm", "number");
  const depth = textInput("depth_cm", "number");
  const weight = el("select", { name: "weight_class", id: "weight_class" },
    el("option", { value: "light" }, "light"),
    el("option", { value: "medium" }, "medium"),
    el("option", { value: "heavy" }, "heavy"),
  );
  const fragile = el("input", { type: "checkbox", name: "fragile", id: "fragile" });
  const description = textInput("description");
  const picture = el("input", { type: "file", name: "picture", id: "picture", accept: "image/png,image/jpeg" });

  const srcAddress = textInput("source_address");
  const srcLat = textInput("source_lat", "number");
  const srcLon = textInput("source_lon", "number");
  const dstAddress = textInput("dest_address");
  const dstLat = textInput("dest_lat", "number");
  const dstLon = textInput("dest_lon", "number");
  const rcvName = textInput("receiver_name");
  const rcvEmail = textInput("receiver_email", "email");

  const status = el("p", { class: "status" });
  const form = el(
    "form",
    { class: "card", id: "create-delivery" },
    el("h2", {}, "New delivery"),
    el("div", { class: "grid3" },
      labeled("width_cm", "Width (cm)", width),
      labeled("height_cm", "Height (cm)", height),
      labeled("depth_cm", "Depth (cm)", depth),
    ),
    el("div", { class: "grid3" },
      labeled("weight_class", "Weight class", weight),
      labeled("fragile", "Fragile", fragile),
      labeled("picture", "Picture (optional)", picture),
    ),
    labeled("description", "Description (optional)", description),
    el("h3", {}, "From"),
    labeled("source_address", "Address", srcAddress),
    el("div", { class: "grid3" },
      labeled("source_lat", "Latitude", srcLat),
      labeled("source_lon", "Longitude", srcLon),
    ),
    el("h3", {}, "To"),
    labeled("dest_address", "Address", dstAddress),
    el("div", { class: "grid3" },
      labeled("dest_lat", "Latitude", dstLat),
      labeled("dest_lon", "Longitude", dstLon),
    ),
    el("h3", {}, "Receiver"),
    el("div", { class: "grid3" },
      labeled("receiver_name", "Name", rcvName),
      labeled("receiver_email", "Email", rcvEmail),
    ),
    el("button", { type: "submit" }, "Create delivery"),
    status,
  );

  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    clearErrors(form);
    status.textContent = "";
    if (!validateCreateForm(form, {
      width: width.value, height: height.value, depth: depth.value,
      srcLat: srcLat.value, srcLon: srcLon.value,
      dstLat: dstLat.value, dstLon: dstLon.value,
      receiverEmail: rcvEmail.value, receiverName: rcvName.value,
      srcAddress: srcAddress.value, dstAddress: dstAddress.value,
    })) {
      return;
    }
    const payload = {
      item: {
        width_cm: Number(width.value),
        height_cm: Number(height.value),
        depth_cm: Number(depth.value),
        weight_class: (weight as HTMLSelectElement).value,
        fragile: (fragile as HTMLInputElement).checked,
        description: description.value || null,
      },
      source: { address_text: srcAddress.value, lat: Number(srcLat.value), lon: Number(srcLon.value) },
      destination: { address_text: dstAddress.value, lat: Number(dstLat.value), lon: Number(dstLon.value) },
      receiver: { name: rcvName.value, email: rcvEmail.value },
    };
    const file = (picture as HTMLInputElement).files?.[0] ?? null;
    try {
      const created = (await ctx.api.createDelivery(payload, file)) as { tracking_code: string };
      status.textContent = `Created. Tracking code: ${created.tracking_code}`;
      status.classList.add("ok");
      form.dispatchEvent(new CustomEvent("delivery-created", { bubbles: true }));
    } catch (err) {
      if (err instanceof ApiError && err.body.fields) {
        for (const [name, msg] of Object.entries(err.body.fields)) {
          fieldError(form, serverFieldToInput(name), msg);
        }
      }
      status.textContent = err instanceof ApiError ? err.body.message : String(err);
    }
  });
  return form;
}

export function validateCreateForm(
  form: HTMLElement,
  v: {
    width: string; height: string; depth: string;
    srcLat: string; srcLon: string; dstLat: string; dstLon: string;
    receiverEmail: string; receiverName: string;
    srcAddress: string; dstAddress: string;
  },
): boolean {
  let ok = true;
  const positive: Array<[string, string]> = [
    ["width_cm", v.width], ["height_cm", v.height], ["depth_cm", v.depth],
  ];
  for (const [name, raw] of positive) {
    if (!(Number(raw) > 0)) {
      fieldError(form, name, "must be a positive number");
      ok = false;
    }
  }
  const coords: Array<[string, string, number]> = [
    ["source_lat", v.srcLat, 90], ["source_lon", v.srcLon, 180],
    ["dest_lat", v.dstLat, 90], ["dest_lon", v.dstLon, 180],
  ];
  for (const [name, raw, bound] of coords) {
    const num = Number(raw);
    if (raw.trim() === "" || Number.isNaN(num) || Math.abs(num) > bound) {
      fieldError(form, name, `must be within ±${bound}`);
      ok = false;
    }
  }
  if (!v.srcAddress.trim()) { fieldError(form, "source_address", "required"); ok = false; }
  if (!v.dstAddress.trim()) { fieldError(form, "dest_address", "required"); ok = false; }
  if (!v.receiverName.trim()) { fieldError(form, "receiver_name", "required"); ok = false; }
  if (!/^[^@\s]+@[^@\s]+\.[^@\s]+$/.test(v.receiverEmail)) {
    fieldError(form, "receiver_email", "enter a valid email address");
    ok = false;
  }
  return ok;
}

function serverFieldToInput(name: string): string {
  return name
    .replace("source.", "source_")
    .replace("destination.", "dest_")
    .replace("receiver.", "receiver_")
    .replace("address_text", "address")
    .replace("latitude", "lat")
    .replace("longitude", "lon");
}

async function refreshItems(ctx: PageContext, card: HTMLElement): Promise<void> {
  try {
    const sent = (await ctx.api.history("sent")) as HistoryEntry[];
    clear(card);
    card.append(el("h2", {}, "My items"));
    const active = sent.filter((d) => ACTIVE_STATES.has(d.state));
    const inactive = sent.filter((d) => !ACTIVE_STATES.has(d.state));
    card.append(section("Active", active, ctx), section("Inactive", inactive, ctx));
  } catch {
    // keep whatever is on screen; history is refreshed on the next event
  }
}

function section(title: string, items: HistoryEntry[], ctx: PageContext): HTMLElement {
  const wrapper = el("div", { class: "items-section" }, el("h3", {}, title));
  if (!items.length) {
    wrapper.append(el("p", { class: "empty" }, `No ${title.toLowerCase()} items.`));
    return wrapper;
  }
  const list = el("ul", { class: "item-list" });
  for (const item of items) {
    const track = el("a", { href: `#/track/${item.tracking_code}` }, item.tracking_code);
    list.append(
      el("li", {},
        track,
        el("span", { class: `state state-${item.state}` }, item.state),
        el("span", {}, ` → ${item.destination.address_text}`),
      ),
    );
  }
  wrapper.append(list);
  return wrapper;
}

async function refreshStats(ctx: PageContext, card: HTMLElement): Promise<void> {
  try {
    const stats = (await ctx.api.statistics(5)) as Statistics;
    clear(card);
    card.append(el("h2", {}, "Statistics"), renderBars(stats));
  } catch {
    // non-fatal
  }
}

export function renderBars(stats: Statistics): HTMLElement {
  const max = Math.max(1, ...Object.values(stats.months));
  const chart = el("div", { class: "chart" });
  for (const month of stats.window) {
    const count = stats.months[month] ?? 0;
    const bar = el("div", { class: "bar", "data-month": month, "data-count": String(count) });
    bar.style.height = `${(count / max) * 120 + 2}px`;
    bar.title = `${month}: ${count}`;
    chart.append(
      el("div", { class: "bar-col" }, bar, el("span", { class: "bar-label" }, month.slice(5))),
    );
  }
  chart.append(el("p", { class: "total" }, `${stats.total} sent in the last ${stats.window.length} months`));
  return chart;
}
