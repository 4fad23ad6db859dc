// DOM components: goal card, transcript view, act composer form, feedback bar.

import { DomainInfo, GoalInfo } from "./api.js";
import { ComposerState, renderUserAct, toActPayload, validateAct } from "./composer.js";
import { ChatSession, SessionView } from "./session.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderGoalCard(goal: GoalInfo): HTMLElement {
  const card = el("div", "goal-card");
  card.appendChild(el("h3", undefined, "Your goal"));
  const constraints = el("div", "goal-section");
  constraints.appendChild(el("h4", undefined, "You know (constraints)"));
  const clist = el("ul");
  for (const [slot, value] of Object.entries(goal.constraints).sort()) {
    clist.appendChild(el("li", undefined, `${slot} = ${value}`));
  }
  constraints.appendChild(clist);
  const requests = el("div", "goal-section");
  requests.appendChild(el("h4", undefined, "You need to find out"));
  const rlist = el("ul");
  for (const slot of [...goal.requests].sort()) {
    rlist.appendChild(el("li", undefined, `${slot} = ?`));
  }
  requests.appendChild(rlist);
  card.appendChild(constraints);
  card.appendChild(requests);
  return card;
}

export function renderTranscript(view: SessionView): HTMLElement {
  const pane = el("div", "transcript");
  view.transcript.forEach((entry, index) => {
    const bubble = el("div", `turn ${entry.actor}`);
    bubble.appendChild(el("span", "actor", entry.actor === "user" ? "you" : "agent"));
    const text = entry.text ?? renderUserAct(entry.act);
    bubble.appendChild(el("span", "text", text));
    bubble.dataset.index = String(index);
    pane.appendChild(bubble);
  });
  return pane;
}

export function renderTurnCounter(view: SessionView): HTMLElement {
  const counter = el("div", "turn-counter");
  counter.id = "turn-counter";
  counter.textContent = `turn ${view.turnCount} / ${view.maxTurns}`;
  return counter;
}

export interface ComposerHandles {
  root: HTMLElement;
  getState(): ComposerState;
  setError(message: string | null): void;
}

export function buildComposer(
  domain: DomainInfo,
  onSend: (state: ComposerState) => void,
): ComposerHandles {
  const root = el("form", "composer");
  root.addEventListener("submit", (event) => event.preventDefault());

  const intentSelect = el("select", "intent-select");
  for (const intent of domain.intents) {
    const option = el("option", undefined, intent);
    option.value = intent;
    intentSelect.appendChild(option);
  }
  intentSelect.value = "inform";

  const informRows = el("div", "inform-rows");
  const addInformRow = () => {
    const row = el("div", "inform-row");
    const slotSelect = el("select", "slot-select");
    for (const slot of domain.slots) {
      const option = el("option", undefined, slot);
      option.value = slot;
      slotSelect.appendChild(option);
    }
    const valueInput = el("input", "value-input");
    valueInput.placeholder = "value";
    const remove = el("button", "remove-row", "x");
    remove.type = "button";
    remove.addEventListener("click", () => row.remove());
    row.append(slotSelect, valueInput, remove);
    informRows.appendChild(row);
  };
  const addInform = el("button", "add-inform", "+ slot value");
  addInform.type = "button";
  addInform.addEventListener("click", addInformRow);

  const requestBoxes = el("div", "request-boxes");
  for (const slot of domain.slots) {
    const label = el("label", "request-option");
    const box = el("input");
    box.type = "checkbox";
    box.value = slot;
    label.append(box, document.createTextNode(slot));
    requestBoxes.appendChild(label);
  }

  const error = el("div", "composer-error");
  const send = el("button", "send", "Send");
  send.type = "submit";

  const getState = (): ComposerState => ({
    intent: intentSelect.value,
    informSlots: [...informRows.querySelectorAll(".inform-row")].map((row) => ({
      slot: (row.querySelector(".slot-select") as HTMLSelectElement).value,
      value: (row.querySelector(".value-input") as HTMLInputElement).value,
    })),
    requestSlots: [...requestBoxes.querySelectorAll("input:checked")].map(
      (box) => (box as HTMLInputElement).value,
    ),
  });

  root.addEventListener("submit", () => onSend(getState()));
  root.append(intentSelect, informRows, addInform, requestBoxes, error, send);
  return {
    root,
    getState,
    setError(message) {
      error.textContent = message ?? "";
    },
  };
}

export function renderFeedbackBar(
  onFinish: (success: boolean) => void,
  onAbandon: () => void,
): HTMLElement {
  const bar = el("div", "feedback-bar");
  const success = el("button", "finish-success", "Task succeeded");
  const failure = el("button", "finish-failure", "Task failed");
  const abandon = el("button", "abandon", "Abandon dialogue");
  let submitted = false;
  const once = (fn: () => void) => () => {
    if (submitted) return;
    submitted = true;
    bar.querySelectorAll("button").forEach((b) => ((b as HTMLButtonElement).disabled = true));
    fn();
  };
  success.addEventListener("click", once(() => onFinish(true)));
  failure.addEventListener("click", once(() => onFinish(false)));
  abandon.addEventListener("click", once(onAbandon));
  bar.append(success, failure, abandon);
  return bar;
}

export function mountApp(
  root: HTMLElement,
  domain: DomainInfo,
  session: ChatSession,
): { composer: ComposerHandles; refresh: () => void } {
  const layout = el("div", "layout");
  const sidebar = el("div", "sidebar");
  sidebar.appendChild(renderGoalCard(session.info.goal));
  const prompt = el("p", "opening-prompt", session.info.opening_prompt);
  sidebar.appendChild(prompt);
  const main = el("div", "main");
  const header = el("div", "header");
  const transcriptHost = el("div", "transcript-host");
  const composerHost = el("div", "composer-host");
  const footer = el("div", "footer");
  main.append(header, transcriptHost, composerHost, footer);
  layout.append(sidebar, main);
  root.replaceChildren(layout);

  const composer = buildComposer(domain, async (state) => {
    const problem = validateAct(state, domain);
    if (problem) {
      composer.setError(problem);
      return;
    }
    composer.setError(null);
    try {
      await session.sendTurn(toActPayload(state));
    } catch {
      composer.setError("send failed — check the connection and press Send to retry");
    }
  });
  composerHost.appendChild(composer.root);

  footer.appendChild(
    renderFeedbackBar(
      (success) => void session.finish(success),
      () => void session.abandon(),
    ),
  );

  const refresh = () => {
    const view = session.view();
    header.replaceChildren(renderTurnCounter(view), el("span", "status", view.status));
    transcriptHost.replaceChildren(renderTranscript(view));
    if (view.phase !== "active") {
      composer.root.querySelectorAll("button, select, input").forEach(
        (node) => ((node as HTMLButtonElement).disabled = true),
      );
    }
    if (view.outcome) {
      footer.replaceChildren(
        el(
          "div",
          "outcome",
          `Recorded: ${view.outcome.status} (return ${view.outcome.episode_return}, ` +
            `${view.outcome.committed_tuples} turns committed)`,
        ),
      );
    }
  };
  session.onChange(refresh);
  refresh();
  return { composer, refresh };
}
