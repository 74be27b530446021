/** DOM rendering: the token strip with target/proposed highlighting and the
 * selectable follow-up view. */

import { ActiveQuery } from "./types.js";
import { SelectionState, isSelected } from "./selection.js";

export interface TokenHandlers {
  onTokenDown?: (index: number) => void;
  onTokenEnter?: (index: number) => void;
}

function inRange(index: number, range: [number, number]): boolean {
  return range[0] <= index && index <= range[1];
}

/**
 * Render the document tokens into `container`. The target mention is yellow,
 * the proposed antecedent blue; during the follow-up phase tokens become
 * selectable and the current selection is marked.
 */
export function renderTokens(
  container: HTMLElement,
  query: ActiveQuery,
  selection: SelectionState | null,
  handlers: TokenHandlers = {},
): void {
  container.textContent = "";
  query.tokens.forEach((token, index) => {
    const el = document.createElement("span");
    el.textContent = token;
    el.dataset.index = String(index);
    el.className = "token";
    if (inRange(index, query.target)) el.classList.add("target");
    else if (inRange(index, query.proposed)) el.classList.add("proposed");
    if (selection !== null && isSelected(selection, index)) el.classList.add("selected");
    if (handlers.onTokenDown) {
      el.classList.add("selectable");
      el.addEventListener("mousedown", (event) => {
        event.preventDefault();
        handlers.onTokenDown!(index);
      });
      el.addEventListener("mouseenter", () => handlers.onTokenEnter?.(index));
    }
    container.appendChild(el);
    container.appendChild(document.createTextNode(" "));
  });
}
