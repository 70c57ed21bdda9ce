/** DOM bindings: image panes, progress, timing display, keyboard input,
 * and synchronized zoom/pan. The view never shows method identities or
 * sanity flags; it only knows about left and right. */

import { SessionStatus, TrialView } from "./api.js";

export interface ViewElements {
  leftImage: HTMLImageElement;
  rightImage: HTMLImageElement;
  leftPane: HTMLElement;
  rightPane: HTMLElement;
  progress: HTMLElement;
  timer: HTMLElement;
  message: HTMLElement;
  retryButton: HTMLButtonElement;
}

export function queryViewElements(root: Document): ViewElements {
  const get = <T extends HTMLElement>(id: string): T => {
    const el = root.getElementById(id);
    if (!el) {
      throw new Error(`missing element #${id}`);
    }
    return el as T;
  };
  return {
    leftImage: get<HTMLImageElement>("left-image"),
    rightImage: get<HTMLImageElement>("right-image"),
    leftPane: get("left-pane"),
    rightPane: get("right-pane"),
    progress: get("progress"),
    timer: get("timer"),
    message: get("message"),
    retryButton: get<HTMLButtonElement>("retry"),
  };
}

function loadOne(img: HTMLImageElement, url: string): Promise<void> {
  return new Promise((resolve, reject) => {
    const cleanup = () => {
      img.removeEventListener("load", onLoad);
      img.removeEventListener("error", onError);
    };
    const onLoad = () => {
      cleanup();
      resolve();
    };
    const onError = () => {
      cleanup();
      reject(new Error(`failed to load ${url}`));
    };
    img.addEventListener("load", onLoad);
    img.addEventListener("error", onError);
    img.src = url;
  });
}

/** Loader resolving only when BOTH panes finished loading their image. */
export function makeImageLoader(left: HTMLImageElement,
                                right: HTMLImageElement) {
  return (leftUrl: string, rightUrl: string): Promise<void> =>
    Promise.all([loadOne(left, leftUrl), loadOne(right, rightUrl)])
      .then(() => undefined);
}

/** Wire double-clicks, buttons, and arrow keys to a choice callback. */
export function bindChoiceInputs(doc: Document, el: ViewElements,
                                 choose: (side: "left" | "right") => void): void {
  el.leftPane.addEventListener("dblclick", () => choose("left"));
  el.rightPane.addEventListener("dblclick", () => choose("right"));
  doc.getElementById("choose-left")?.addEventListener(
    "click", () => choose("left"));
  doc.getElementById("choose-right")?.addEventListener(
    "click", () => choose("right"));
  doc.addEventListener("keydown", (event) => {
    if (event.key === "ArrowLeft") {
      choose("left");
    } else if (event.key === "ArrowRight") {
      choose("right");
    }
  });
}

export class StudyView {
  private timerHandle: ReturnType<typeof setInterval> | null = null;
  private zoom = 1;
  private panX = 0;
  private panY = 0;

  constructor(private el: ViewElements) {}

  showLoading(trial: TrialView): void {
    this.stopTimer();
    this.resetZoom();
    this.el.retryButton.hidden = true;
    this.el.message.textContent = "Loading images…";
    this.el.progress.textContent =
      `Trial ${trial.index + 1} of ${trial.total}`;
    this.el.timer.textContent = "";
  }

  showReady(): void {
    this.el.message.textContent =
      "Pick the image with the more pleasing visual quality " +
      "(aim for 2–5 seconds). Click a side or use ← / →.";
    const startedAt = Date.now();
    this.timerHandle = setInterval(() => {
      const seconds = (Date.now() - startedAt) / 1000;
      this.el.timer.textContent = `${seconds.toFixed(1)} s`;
    }, 100);
  }

  showLoadError(message: string): void {
    this.stopTimer();
    this.el.message.textContent = `Image failed to load: ${message}`;
    this.el.retryButton.hidden = false;
  }

  showProgress(answered: number, total: number): void {
    this.el.progress.textContent = `Trial ${answered} of ${total}`;
  }

  showComplete(status: SessionStatus): void {
    this.stopTimer();
    this.el.timer.textContent = "";
    this.el.progress.textContent =
      `All ${status.total} trials answered — thank you!`;
    let verdict = "";
    if (status.sanity !== null) {
      const pct = Math.round(status.sanity.consistency * 100);
      verdict = status.sanity.passed
        ? ` Session check passed (${pct}% repeat consistency).`
        : ` Session check did not pass (${pct}% repeat consistency).`;
    }
    this.el.message.textContent = `Session complete.${verdict}`;
    this.el.leftImage.removeAttribute("src");
    this.el.rightImage.removeAttribute("src");
  }

  private stopTimer(): void {
    if (this.timerHandle !== null) {
      clearInterval(this.timerHandle);
      this.timerHandle = null;
    }
  }

  // -- synchronized zoom/pan -------------------------------------------

  private applyTransform(): void {
    const transform =
      `translate(${this.panX}px, ${this.panY}px) scale(${this.zoom})`;
    this.el.leftImage.style.transform = transform;
    this.el.rightImage.style.transform = transform;
  }

  resetZoom(): void {
    this.zoom = 1;
    this.panX = 0;
    this.panY = 0;
    this.applyTransform();
  }

  zoomBy(factor: number): void {
    this.zoom = Math.min(8, Math.max(1, this.zoom * factor));
    if (this.zoom === 1) {
      this.panX = 0;
      this.panY = 0;
    }
    this.applyTransform();
  }

  panBy(dx: number, dy: number): void {
    if (this.zoom === 1) {
      return;
    }
    this.panX += dx;
    this.panY += dy;
    this.applyTransform();
  }

  bindZoomAndPan(): void {
    for (const pane of [this.el.leftPane, this.el.rightPane]) {
      pane.addEventListener("wheel", (event) => {
        event.preventDefault();
        this.zoomBy(event.deltaY < 0 ? 1.2 : 1 / 1.2);
      }, { passive: false });
      let dragging = false;
      let lastX = 0;
      let lastY = 0;
      pane.addEventListener("pointerdown", (event) => {
        dragging = true;
        lastX = event.clientX;
        lastY = event.clientY;
      });
      pane.addEventListener("pointermove", (event) => {
        if (!dragging) {
          return;
        }
        this.panBy(event.clientX - lastX, event.clientY - lastY);
        lastX = event.clientX;
        lastY = event.clientY;
      });
      for (const name of ["pointerup", "pointerleave"]) {
        pane.addEventListener(name, () => {
          dragging = false;
        });
      }
    }
  }
}
