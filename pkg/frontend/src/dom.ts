// Tiny DOM helpers; no framework.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function fieldError(form: HTMLElement, name: string, message: string): void {
  const slot = form.querySelector(`[data-error-for="${name}"]`);
  if (slot) slot.textContent = message;
}

export function clearErrors(form: HTMLElement): void {
  form.querySelectorAll("[data-error-for]").forEach((n) => (n.textContent = ""));
}

export function labeled(
  name: string,
  label: string,
  input: HTMLElement,
): HTMLElement {
  return el(
    "div",
    { class: "field" },
    el("label", { for: name }, label),
    input,
    el("span", { class: "error", "data-error-for": name }),
  );
}

export function textInput(name: string, type = "text", placeholder = ""): HTMLInputElement {
  return el("input", { name, id: name, type, placeholder });
}
