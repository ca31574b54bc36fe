import { describe, expect, it } from "vitest";

import { NEXT_STATES, isTerminal, nextStates } from "../src/transitions.js";

// The UI must offer exactly the platform's transition table.
const EXPECTED: Record<string, string[]> = {
  ready: ["assigned"],
  assigned: ["delivering", "undeliverable", "ready"],
  delivering: ["delivered", "undeliverable"],
  delivered: [],
  undeliverable: [],
};

describe("client transition table", () => {
  it("matches the service state machine edge for edge", () => {
    expect(NEXT_STATES).toEqual(EXPECTED);
    const edgeCount = Object.values(NEXT_STATES).reduce((n, v) => n + v.length, 0);
    expect(edgeCount).toBe(6);
  });

  it("terminal states offer no actions", () => {
    expect(isTerminal("delivered")).toBe(true);
    expect(isTerminal("undeliverable")).toBe(true);
    expect(isTerminal("delivering")).toBe(false);
    expect(nextStates("unknown-state")).toEqual([]);
  });
});
