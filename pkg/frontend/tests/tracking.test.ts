import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { renderTracking } from "../src/pages/tracking.js";
import type { PageContext } from "../src/router.js";
import { FakeSocket, fakeSocketFactory, jsonResponse, sessionWith, stubCanvas } from "./helpers.js";

const VIEW = {
  tracking_code: "AB2345CD67EF",
  state: "delivering",
  source_address: "Obchodna 1",
  destination_address: "Mlynska 7",
  item: { width_cm: 30, height_cm: 20, depth_cm: 10, weight_class: "medium", fragile: false },
  expected_delivery_time: "2026-08-10T15:30:00.000000Z",
};

function makeCtx(fetchFn: (url: string, init?: RequestInit) => Promise<Response>): PageContext {
  const session = sessionWith(null);
  const api = new ApiClient("http://api", session, fetchFn);
  return {
    api,
    session,
    wsBase: "ws://api",
    navigate: vi.fn(),
    onLeave: vi.fn(),
    socketFactory: fakeSocketFactory(),
  };
}

async function settle(ready: () => boolean, timeoutMs = 1000): Promise<void> {
  const start = Date.now();
  while (!ready() && Date.now() - start < timeoutMs) {
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

describe("tracking page", () => {
  beforeEach(() => {
    stubCanvas();
    document.body.innerHTML = "<main id='app'></main>";
  });

  it("renders state, route endpoints and ETA for a code", async () => {
    const ctx = makeCtx(async () => jsonResponse(200, VIEW));
    renderTracking(document.getElementById("app")!, ctx, "AB2345CD67EF");
    await settle(() => document.getElementById("tracking-state") !== null);

    const root = document.getElementById("app")!;
    expect(root.querySelector("#tracking-state")!.textContent).toBe("delivering");
    expect(root.textContent).toContain("Obchodna 1");
    expect(root.textContent).toContain("Mlynska 7");
    expect(root.querySelector("#tracking-eta")!.textContent).toContain("Expected by");
    expect(root.querySelector("#tracking-receiver")).toBeNull(); // anonymous: redacted
  });

  it("appends live positions arriving on the delivery channel", async () => {
    const ctx = makeCtx(async () => jsonResponse(200, VIEW));
    renderTracking(document.getElementById("app")!, ctx, "AB2345CD67EF");
    await settle(() => FakeSocket.instances.length > 0);

    const socket = FakeSocket.instances[0];
    expect(socket.url).toBe("ws://api/ws/deliveries/AB2345CD67EF/");
    for (let i = 0; i < 3; i++) {
      socket.serverPush({
        delivery_id: "AB2345CD67EF",
        courier_id: "c1",
        lat: 48.15 + i * 0.001,
        lon: 17.11,
        ts: `2026-08-10T12:00:0${i}.000000Z`,
      });
    }
    const log = document.getElementById("position-log")!;
    expect(log.children).toHaveLength(3);
    // newest first
    expect(log.children[0].textContent).toContain("48.15200");
    expect(log.children[2].textContent).toContain("48.15000");
  });

  it("shows receiver identity when the server includes it", async () => {
    const ctx = makeCtx(async () =>
      jsonResponse(200, {
        ...VIEW,
        receiver: { first_name: "Rado", last_name: "Receiver", email: "rado@x.org" },
      }),
    );
    renderTracking(document.getElementById("app")!, ctx, "AB2345CD67EF");
    await settle(() => document.getElementById("tracking-receiver") !== null);
    expect(document.getElementById("tracking-receiver")!.textContent).toContain("rado@x.org");
  });

  it("reports unknown codes", async () => {
    const ctx = makeCtx(async () =>
      jsonResponse(404, { error: { code: "unknown_tracking_code", message: "unknown tracking code" } }),
    );
    renderTracking(document.getElementById("app")!, ctx, "NOPE");
    await settle(() => (document.querySelector(".status")?.textContent ?? "") !== "");
    expect(document.querySelector(".status")!.textContent).toContain("No parcel with that code");
  });

  it("registers socket teardown with the router", async () => {
    const ctx = makeCtx(async () => jsonResponse(200, VIEW));
    renderTracking(document.getElementById("app")!, ctx, "AB2345CD67EF");
    await settle(() => (ctx.onLeave as ReturnType<typeof vi.fn>).mock.calls.length > 0);
    expect(ctx.onLeave).toHaveBeenCalled();
    const teardown = (ctx.onLeave as ReturnType<typeof vi.fn>).mock.calls[0][0] as () => void;
    teardown();
    expect(FakeSocket.instances[0].closed).toBe(true);
  });
});
