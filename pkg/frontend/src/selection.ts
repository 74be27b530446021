/** Token-range selection for the first-occurrence follow-up question.
 *
 * The user anchors a selection on one token and extends it to another; the
 * captured range is always the contiguous [min, max] token interval. A range
 * is only submittable when it ends before the target span starts (an
 * antecedent must precede the mention it resolves).
 */

export interface TokenRange {
  start: number;
  end: number; // inclusive
}

export interface SelectionState {
  anchor: number | null;
  range: TokenRange | null;
}

export const emptySelection: SelectionState = { anchor: null, range: null };

/** First click anchors; dragging (or a second click) extends to the focus token. */
export function beginSelection(index: number): SelectionState {
  return { anchor: index, range: { start: index, end: index } };
}

export function extendSelection(state: SelectionState, focus: number): SelectionState {
  if (state.anchor === null) return beginSelection(focus);
  return {
    anchor: state.anchor,
    range: { start: Math.min(state.anchor, focus), end: Math.max(state.anchor, focus) },
  };
}

export function isSelected(state: SelectionState, index: number): boolean {
  return state.range !== null && state.range.start <= index && index <= state.range.end;
}

/**
 * Validate a candidate first-occurrence range against the target span.
 * Returns an error message, or null when the range is submittable.
 */
export function validateFirstOccurrence(
  range: TokenRange | null,
  target: [number, number],
): string | null {
  if (range === null) {
    return "Select the tokens of the entity's first occurrence.";
  }
  if (range.start > range.end) {
    return "Selection must be a contiguous token range.";
  }
  if (range.end >= target[0]) {
    return "The first occurrence must come before the highlighted mention.";
  }
  return null;
}
