// When served by the backend under /console/ the API lives on the same
// origin; during development an explicit base can be injected on window.
export function apiBase(): string {
  const w = window as unknown as { CROWDSHIP_API_BASE?: string };
  if (w.CROWDSHIP_API_BASE) return w.CROWDSHIP_API_BASE.replace(/\/$/, "");
  return window.location.origin;
}

export function wsBase(): string {
  return apiBase().replace(/^http/, "ws");
}
