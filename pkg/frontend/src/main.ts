import { SandboxApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const app = new SandboxApp({
  baseUrl: params.get("service") ?? "http://127.0.0.1:8000",
  channel: params.get("channel") ?? "paper-feed",
  root: document.getElementById("app") ?? document.body,
});

void app.start().catch((error) => {
  const pre = document.createElement("pre");
  pre.className = "boot-error";
  pre.textContent = `failed to start: ${String(error)}`;
  document.body.appendChild(pre);
});
