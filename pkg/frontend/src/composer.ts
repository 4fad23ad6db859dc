// Form-based dialogue-act composition with validation against the service's
// closed intent/slot enumerations and the act invariants: a request carries at
// least one request slot; an inform carries at least one inform slot and no
// request slots.

import { ActPayload, DomainInfo } from "./api.js";

export interface ComposerState {
  intent: string;
  informSlots: { slot: string; value: string }[];
  requestSlots: string[];
}

export function emptyComposerState(): ComposerState {
  return { intent: "inform", informSlots: [], requestSlots: [] };
}

export function validateAct(state: ComposerState, domain: DomainInfo): string | null {
  if (!domain.intents.includes(state.intent)) {
    return `unknown intent: ${state.intent}`;
  }
  const slots = new Set(domain.slots);
  for (const { slot, value } of state.informSlots) {
    if (!slots.has(slot)) return `unknown slot: ${slot}`;
    if (value.trim() === "") return `empty value for ${slot}`;
  }
  for (const slot of state.requestSlots) {
    if (!slots.has(slot)) return `unknown slot: ${slot}`;
  }
  if (state.intent === "request" && state.requestSlots.length === 0) {
    return "a request needs at least one request slot";
  }
  if (state.intent === "inform") {
    if (state.informSlots.length === 0) return "an inform needs at least one slot value";
    if (state.requestSlots.length > 0) return "an inform cannot carry request slots";
  }
  return null;
}

export function toActPayload(state: ComposerState): ActPayload {
  const inform: Record<string, string> = {};
  for (const { slot, value } of state.informSlots) {
    inform[slot] = value.trim();
  }
  return {
    intent: state.intent,
    inform_slots: inform,
    request_slots: [...state.requestSlots],
  };
}

const USER_TEXT: Record<string, string> = {
  thanks: "Thank you!",
  closing: "Goodbye.",
  deny: "No, that's not right.",
  not_sure: "I'm not sure.",
  greeting: "Hi!",
};

/** Natural-ish rendering of a composed user act for the transcript pane. */
export function renderUserAct(act: ActPayload): string {
  const parts: string[] = [];
  if (act.request_slots.length > 0) {
    parts.push(`What ${act.request_slots.join(" and ")} is available?`);
  }
  const informs = Object.entries(act.inform_slots);
  if (informs.length > 0) {
    parts.push(informs.map(([slot, value]) => `${slot}: ${value}`).join(", "));
  }
  if (parts.length === 0) {
    return USER_TEXT[act.intent] ?? act.intent;
  }
  return parts.join(" — ");
}
