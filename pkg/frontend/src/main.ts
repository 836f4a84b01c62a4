/** Browser entry point: mount the app against ?api=... or same-origin. */

import { App } from "./app.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery;
  return window.location.origin;
}

const root = document.getElementById("app");
if (root) {
  const app = new App(root, apiBase());
  app.init().catch((err) => {
    root.textContent = `failed to reach the API at ${apiBase()}: ${err}`;
  });
  window.addEventListener("beforeunload", (e) => {
    if (app.annState?.dirty()) e.preventDefault();
  });
}
