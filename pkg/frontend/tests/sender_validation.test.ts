import { beforeEach, describe, expect, it } from "vitest";

import { el, labeled, textInput } from "../src/dom.js";
import { renderBars, validateCreateForm } from "../src/pages/sender.js";

function formWith(names: string[]): HTMLElement {
  const form = el("form");
  for (const name of names) form.append(labeled(name, name, textInput(name)));
  return form;
}

const FIELD_NAMES = [
  "width_cm", "height_cm", "depth_cm",
  "source_lat", "source_lon", "dest_lat", "dest_lon",
  "source_address", "dest_address", "receiver_name", "receiver_email",
];

const GOOD = {
  width: "30", height: "20", depth: "10",
  srcLat: "48.1", srcLon: "17.1", dstLat: "48.2", dstLon: "17.2",
  receiverEmail: "r@x.org", receiverName: "Rado",
  srcAddress: "A", dstAddress: "B",
};

describe("delivery form inline validation", () => {
  let form: HTMLElement;
  beforeEach(() => {
    form = formWith(FIELD_NAMES);
  });

  it("accepts a well-formed parcel", () => {
    expect(validateCreateForm(form, GOOD)).toBe(true);
  });

  it("flags non-positive dimensions before submit", () => {
    expect(validateCreateForm(form, { ...GOOD, width: "0", depth: "-3" })).toBe(false);
    expect(form.querySelector("[data-error-for='width_cm']")!.textContent).toContain("positive");
    expect(form.querySelector("[data-error-for='depth_cm']")!.textContent).toContain("positive");
    expect(form.querySelector("[data-error-for='height_cm']")!.textContent).toBe("");
  });

  it("flags out-of-range coordinates", () => {
    expect(validateCreateForm(form, { ...GOOD, srcLat: "91", dstLon: "181" })).toBe(false);
    expect(form.querySelector("[data-error-for='source_lat']")!.textContent).toContain("±90");
    expect(form.querySelector("[data-error-for='dest_lon']")!.textContent).toContain("±180");
  });

  it("flags a bad receiver email", () => {
    expect(validateCreateForm(form, { ...GOOD, receiverEmail: "not-an-email" })).toBe(false);
    expect(form.querySelector("[data-error-for='receiver_email']")!.textContent).not.toBe("");
  });

  it("requires addresses and receiver name", () => {
    expect(validateCreateForm(form, { ...GOOD, srcAddress: " ", receiverName: "" })).toBe(false);
    expect(form.querySelector("[data-error-for='source_address']")!.textContent).toBe("required");
    expect(form.querySelector("[data-error-for='receiver_name']")!.textContent).toBe("required");
  });
});

describe("statistics chart", () => {
  it("renders one bar per month with counts", () => {
    const chart = renderBars({
      window: ["2026-04", "2026-05", "2026-06"],
      months: { "2026-04": 0, "2026-05": 2, "2026-06": 1 },
      total: 3,
    });
    const bars = chart.querySelectorAll(".bar");
    expect(bars).toHaveLength(3);
    expect(bars[1].getAttribute("data-count")).toBe("2");
    expect(chart.textContent).toContain("3 sent in the last 3 months");
  });
});
