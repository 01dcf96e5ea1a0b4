import { ApiClient } from "./api.js";
import { ChatApp } from "./app.js";

// Base URL comes from ?api=… so the static page can point at any deployment.
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8000";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

const app = new ChatApp({
  root,
  api: new ApiClient(baseUrl),
  storage: window.localStorage,
  tabStorage: window.sessionStorage,
});
void app.init();
