import type { ScreenPayloadWire, UiMessage } from "./types.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text; // textContent: XSS safe
  return node;
}

export interface BubbleHooks {
  onChip?: (text: string) => void;
}

function renderScreen(
  bubble: HTMLElement,
  screen: ScreenPayloadWire,
  hooks: BubbleHooks,
): void {
  if (screen.step_position) {
    const { index, total } = screen.step_position;
    bubble.prepend(el("div", "step-header", `Step ${index + 1} of ${total}`));
  }
  if (screen.headline) {
    bubble.prepend(el("div", "headline", screen.headline));
  }
  for (const image of screen.images) {
    const img = el("img", "thumb");
    img.src = image.url;
    img.alt = image.caption ?? "";
    img.loading = "lazy";
    bubble.appendChild(img);
  }
  if (screen.requirements_view) {
    const list = el("ul", "checklist");
    for (const requirement of screen.requirements_view) {
      const item = el("li");
      const label = el("label");
      const box = el("input");
      box.type = "checkbox";
      const name = requirement.quantity
        ? `${requirement.name} (${requirement.quantity})`
        : requirement.name;
      label.appendChild(box);
      label.appendChild(document.createTextNode(` ${name}`));
      item.appendChild(label);
      list.appendChild(item);
    }
    bubble.appendChild(list);
  }
  if (screen.options.length > 0) {
    const chips = el("div", "chips");
    for (const option of screen.options) {
      const chip = el("button", "chip", option);
      chip.type = "button";
      chip.addEventListener("click", () => hooks.onChip?.(option));
      chips.appendChild(chip);
    }
    bubble.appendChild(chips);
  }
}

/** One message bubble; system bubbles also render their screen payload. */
export function createBubble(message: UiMessage, hooks: BubbleHooks = {}): HTMLElement {
  const bubble = el("div", `bubble bubble-${message.role}`);
  bubble.appendChild(el("div", "text", message.text));
  if (message.role === "system" && message.screen) {
    renderScreen(bubble, message.screen, hooks);
  }
  if (message.debug) {
    bubble.appendChild(
      el("div", "debug", `${message.debug.action_code} → ${message.debug.policy}`),
    );
  }
  return bubble;
}
