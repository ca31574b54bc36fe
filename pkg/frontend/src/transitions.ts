// Client-side mirror of the delivery state machine: the UI offers exactly
// these next states for each current state, nothing else.

export const NEXT_STATES: Record<string, string[]> = {
  ready: ["assigned"],
  assigned: ["delivering", "undeliverable", "ready"],
  delivering: ["delivered", "undeliverable"],
  delivered: [],
  undeliverable: [],
};

export const STATE_LABELS: Record<string, string> = {
  assigned: "Accept",
  delivering: "Picked up",
  delivered: "Delivered",
  undeliverable: "Cannot deliver",
  ready: "Return to pool",
};

export function nextStates(current: string): string[] {
  return NEXT_STATES[current] ?? [];
}

export function isTerminal(state: string): boolean {
  return nextStates(state).length === 0;
}
