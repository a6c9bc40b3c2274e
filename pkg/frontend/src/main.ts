import { SessionApi } from "./api.js";
import { SessionApp } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

const app = new SessionApp(root, new SessionApi(""));
if (window.location.hash.length > 1) {
  void app.resumeFromFragment(window.location.hash);
}
