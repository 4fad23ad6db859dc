// Entry point: one chat session per browser tab.

import { ApiClient } from "./api.js";
import { mountApp } from "./components.js";
import { ChatSession } from "./session.js";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const client = new ApiClient("");
  const domain = await client.getDomain();
  const session = await ChatSession.create(client);
  mountApp(root, domain, session);

  // The streaming channel keeps the transcript live even if a response is
  // missed; each event triggers a resync against the authoritative state.
  const stream = new EventSource(client.streamUrl(session.info.session_id));
  stream.onmessage = () => void session.resync();
  session.onChange(() => {
    if (session.view().phase === "closed") stream.close();
  });
}

boot().catch((error) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `failed to start: ${error}`;
});
