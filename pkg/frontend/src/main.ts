import { AnnotationApi } from "./api.js";
import { AnnotationApp } from "./app.js";

/**
 * Boot from URL parameters:
 *   index.html?base=http://127.0.0.1:8400&session=s1[&token=...]
 */
function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("base") ?? "http://127.0.0.1:8400";
  const session = params.get("session");
  const token = params.get("token") ?? undefined;
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  if (!session) {
    root.textContent = "Pass ?session=<session id> (and optionally ?base=<service url>).";
    return;
  }
  const app = new AnnotationApp(root, new AnnotationApi(base, token), session);
  void app.start();
}

boot();
