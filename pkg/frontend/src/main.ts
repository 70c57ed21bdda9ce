import { StudyApi } from "./api.js";
import { SessionController, obtainSession } from "./session.js";
import {
  StudyView,
  bindChoiceInputs,
  makeImageLoader,
  queryViewElements,
} from "./view.js";

async function boot(): Promise<void> {
  const api = new StudyApi("");
  const el = queryViewElements(document);
  const view = new StudyView(el);
  view.bindZoomAndPan();

  const { sessionId } = await obtainSession(api, window.sessionStorage);
  const controller = new SessionController(
    api, sessionId, makeImageLoader(el.leftImage, el.rightImage), {
      onTrialLoading: (trial) => view.showLoading(trial),
      onTrialReady: () => view.showReady(),
      onProgress: (answered, total) => view.showProgress(answered, total),
      onComplete: (status) => view.showComplete(status),
      onLoadError: (_trial, message) => view.showLoadError(message),
    });

  const choose = (side: "left" | "right") => {
    void controller.choose(side).catch((error) => {
      el.message.textContent = `Submission failed: ${error}`;
    });
  };
  bindChoiceInputs(document, el, choose);
  el.retryButton.addEventListener("click", () => {
    void controller.retry();
  });

  await controller.start();
}

void boot().catch((error) => {
  const message = document.getElementById("message");
  if (message) {
    message.textContent = `Could not start the session: ${error}`;
  }
});
