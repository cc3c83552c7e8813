import { ApiClient } from "./api";
import { App } from "./app";
import { readUrlState } from "./filters";

const root = document.getElementById("app");
if (root) {
  const app = new App(root, new ApiClient("/api/v1"));
  const { question, filter } = readUrlState(window.location.search);
  if (question) {
    void app.runSearch(question, filter);
  }
}
