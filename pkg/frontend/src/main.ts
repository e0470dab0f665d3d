import { ApiClient } from "./api.js";
import { mountApp } from "./app.js";

declare global {
  interface Window {
    PLAYGROUND_API_BASE?: string;
  }
}

const base = window.PLAYGROUND_API_BASE ?? "http://127.0.0.1:8000";
const root = document.getElementById("app");
if (root) mountApp(root, new ApiClient(base));
