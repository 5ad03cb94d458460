import { ReviewApi } from "./api.js";
import { AppStore } from "./state.js";
import { render } from "./render.js";

const POLL_INTERVAL_MS = 1000;

function start() {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const store = new AppStore(new ReviewApi(""), (state) => render(root, state, store));
  void store.bootstrap();
  setInterval(() => {
    if (store.state.panel === "running") void store.pollOnce();
  }, POLL_INTERVAL_MS);
}

start();
