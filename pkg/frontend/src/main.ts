import { AnnotationApi } from "./api.js";
import { DEFAULT_BASE_URL } from "./config.js";
import { SessionController } from "./session.js";

function required(params: URLSearchParams, name: string): string {
  const value = params.get(name);
  if (!value) {
    throw new Error(`missing ?${name}= query parameter`);
  }
  return value;
}

export function bootstrap(root: HTMLElement, search: string): SessionController {
  const params = new URLSearchParams(search);
  const api = new AnnotationApi(params.get("base") ?? DEFAULT_BASE_URL);
  const controller = new SessionController(root, {
    studyId: required(params, "study"),
    annotatorId: required(params, "annotator"),
    api,
  });
  void controller.start();
  return controller;
}

const rootElement = typeof document !== "undefined" ? document.getElementById("app") : null;
if (rootElement) {
  try {
    bootstrap(rootElement, window.location.search);
  } catch (err) {
    rootElement.textContent = err instanceof Error ? err.message : String(err);
  }
}
