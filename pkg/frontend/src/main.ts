/** Application wiring: one question at a time against the live service. */

import { HttpAnnotationApi } from "./api.js";
import { QuestionFlow } from "./session.js";
import {
  SelectionState,
  beginSelection,
  emptySelection,
  extendSelection,
  validateFirstOccurrence,
} from "./selection.js";
import { renderTokens } from "./render.js";
import { Protocol } from "./types.js";

const api = new HttpAnnotationApi();
const flow = new QuestionFlow(api);

let selection: SelectionState = emptySelection;
let dragging = false;

const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node;
};

function redraw(): void {
  const state = flow.state;
  el("status").textContent = {
    idle: "Choose a protocol to begin.",
    loading: "Loading…",
    initial: "Are the two mentions coreferent?",
    followup: "Select the first occurrence of the entity.",
    done: "No more questions — thank you!",
    error: `Something went wrong: ${state.error ?? "unknown error"}`,
  }[state.phase];

  el("initial-controls").hidden = state.phase !== "initial";
  el("followup-controls").hidden = state.phase !== "followup";
  el("retry").hidden = state.phase !== "error";
  el("answered").textContent = String(state.answered);
  if (state.lastAck !== null && !state.lastAck.accepted) {
    el("conflicts").textContent = `Conflicting answer: ${state.lastAck.conflicts.join("; ")}`;
  }

  const doc = el("document");
  if (state.query === null) {
    doc.textContent = "";
    return;
  }
  if (state.phase === "followup") {
    renderTokens(doc, state.query, selection, {
      onTokenDown: (index) => {
        dragging = true;
        selection = beginSelection(index);
        redraw();
      },
      onTokenEnter: (index) => {
        if (!dragging) return;
        selection = extendSelection(selection, index);
        redraw();
      },
    });
    const problem = validateFirstOccurrence(selection.range, state.query.target);
    el("selection-hint").textContent = selection.range === null ? "" : problem ?? "";
    (el("submit-occurrence") as HTMLButtonElement).disabled = problem !== null;
  } else {
    renderTokens(doc, state.query, null);
  }
}

function begin(protocol: Protocol): void {
  el("protocol-picker").hidden = true;
  void flow.start(protocol);
}

window.addEventListener("mouseup", () => {
  dragging = false;
});

flow.onChange(() => {
  if (flow.state.phase !== "followup") selection = emptySelection;
  redraw();
});

el("start-discrete").addEventListener("click", () => begin("discrete"));
el("start-pairwise").addEventListener("click", () => begin("pairwise"));
el("answer-yes").addEventListener("click", () => void flow.answerYes());
el("answer-no").addEventListener("click", () => void flow.answerNo());
el("submit-occurrence").addEventListener("click", () => {
  void flow.submitFirstOccurrence(selection.range);
});
el("abstain-none").addEventListener("click", () => void flow.abstainNoAntecedent());
el("abstain-invalid").addEventListener("click", () => void flow.abstainInvalidMention());
el("retry").addEventListener("click", () => void flow.fetchNext());

redraw();
