/** Single configuration knob: where the annotation service lives. */
export const DEFAULT_BASE_URL = "http://127.0.0.1:8321";
