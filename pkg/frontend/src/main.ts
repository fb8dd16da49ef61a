import "./style.css";
import { ApiClient, ApiError, NetworkError } from "./api";
import { WorkbenchController } from "./controller";
import { BoxEditor, classColor } from "./editor";
import { drawChart } from "./chart";
import type { Series } from "./chart";

const api = new ApiClient();
const controller = new WorkbenchController(api);

const queueList = document.getElementById("queue-list") as HTMLUListElement;
const runSummary = document.getElementById("run-summary") as HTMLSpanElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const frameLabel = document.getElementById("frame-label") as HTMLSpanElement;
const classSelect = document.getElementById("class-select") as HTMLSelectElement;
const drawBtn = document.getElementById("draw-btn") as HTMLButtonElement;
const addBtn = document.getElementById("add-btn") as HTMLButtonElement;
const deleteBtn = document.getElementById("delete-btn") as HTMLButtonElement;
const submitBtn = document.getElementById("submit-btn") as HTMLButtonElement;
const iterateBtn = document.getElementById("iterate-btn") as HTMLButtonElement;
const editorCanvas = document.getElementById("editor-canvas") as HTMLCanvasElement;
const historyCanvas = document.getElementById("history-canvas") as HTMLCanvasElement;

let editor: BoxEditor | null = null;
let currentFrame: number | null = null;

function showBanner(message: string, kind: "error" | "info" = "error"): void {
  banner.hidden = false;
  banner.textContent = message;
  banner.className = kind === "info" ? "info" : "";
}

function clearBanner(): void {
  banner.hidden = true;
}

function describeError(err: unknown): string {
  if (err instanceof NetworkError) return `service unreachable, retry in a moment (${err.message})`;
  if (err instanceof ApiError) return `server rejected the request: ${err.message}`;
  return String(err);
}

function renderSummary(): void {
  const s = controller.state;
  if (!s) return;
  runSummary.textContent =
    `iteration ${s.iteration} · ${s.labeled_count}/${s.stop_target} labeled · ` +
    `${s.unlabeled_count} unlabeled · ${s.test_count} test · strategy ${s.strategy.kind}` +
    (s.stopped ? " · stopped" : "");
  iterateBtn.disabled = !controller.canIterate();
}

function renderQueue(): void {
  queueList.replaceChildren();
  for (const item of controller.queueItems()) {
    const li = document.createElement("li");
    li.className = item.status === "done" ? "done" : "";
    if (item.frame_index === currentFrame) li.classList.add("active");
    const label = document.createElement("span");
    label.textContent = `frame ${item.frame_index} · ${item.status}`;
    const score = document.createElement("span");
    score.className = "score";
    score.textContent =
      item.weighted_score !== null ? item.weighted_score.toFixed(3) : "–";
    li.append(label, score);
    if (item.status === "pending") {
      li.addEventListener("click", () => void openFrame(item.frame_index));
    }
    queueList.appendChild(li);
  }
}

function renderClassOptions(): void {
  const s = controller.state;
  if (!s) return;
  classSelect.replaceChildren();
  s.class_names.forEach((name, i) => {
    const option = document.createElement("option");
    option.value = String(i);
    option.textContent = `${i}: ${name}`;
    option.style.color = classColor(i);
    classSelect.appendChild(option);
  });
}

async function renderHistory(): Promise<void> {
  try {
    const history = await api.getHistory();
    const scoreSeries: Series = {
      label: "mean weighted score",
      color: "#58a6ff",
      values: history.rounds.map((r) => r.mean_weighted_score),
    };
    const series = [scoreSeries];
    if (history.map_series) {
      series.push({ label: "simulated mAP", color: "#3fb950", values: history.map_series });
    }
    drawChart(historyCanvas, series);
  } catch {
    // history is cosmetic; never block annotation on it
  }
}

async function openFrame(frameIndex: number): Promise<void> {
  const s = controller.state;
  if (!s) return;
  clearBanner();
  try {
    const boxes = await controller.openFrame(frameIndex);
    currentFrame = frameIndex;
    frameLabel.textContent = `frame ${frameIndex}`;
    if (!editor) {
      editor = new BoxEditor(editorCanvas, s.width, s.height);
      editor.onChange = () => syncEditorControls();
    }
    editor.loadFrame(boxes, api.imageUrl(frameIndex));
    submitBtn.disabled = false;
    renderQueue();
    syncEditorControls();
  } catch (err) {
    showBanner(describeError(err));
  }
}

function syncEditorControls(): void {
  if (!editor) return;
  const selected = editor.boxes[editor.selected];
  if (selected) classSelect.value = String(selected.classIndex);
}

async function refreshAll(): Promise<void> {
  try {
    await controller.refresh();
    clearBanner();
  } catch (err) {
    showBanner(describeError(err));
    return;
  }
  renderSummary();
  renderQueue();
  renderClassOptions();
  void renderHistory();
}

classSelect.addEventListener("change", () => {
  editor?.setSelectedClass(Number(classSelect.value));
  if (editor) editor.activeClass = Number(classSelect.value);
});

drawBtn.addEventListener("click", () => {
  if (editor) editor.drawMode = true;
});

addBtn.addEventListener("click", () => editor?.addBoxAtCenter());
deleteBtn.addEventListener("click", () => editor?.deleteSelected());

document.addEventListener("keydown", (e) => {
  if ((e.key === "Delete" || e.key === "Backspace") && document.activeElement === document.body) {
    editor?.deleteSelected();
  }
});

submitBtn.addEventListener("click", () => {
  void (async () => {
    if (currentFrame === null || !editor) return;
    submitBtn.disabled = true;
    try {
      const response = await controller.submitFrame(currentFrame, editor.boxes);
      renderSummary();
      renderQueue();
      if (response.iteration_complete) {
        showBanner("batch complete — you can run the next iteration", "info");
      }
      currentFrame = null;
      frameLabel.textContent = "no frame selected";
    } catch (err) {
      showBanner(describeError(err));
      submitBtn.disabled = false;
    }
  })();
});

iterateBtn.addEventListener("click", () => {
  void (async () => {
    iterateBtn.disabled = true;
    showBanner("running iteration…", "info");
    try {
      const response = await controller.runIteration();
      clearBanner();
      showBanner(`queried frames ${response.queried.join(", ")}`, "info");
      renderSummary();
      renderQueue();
      void renderHistory();
    } catch (err) {
      showBanner(describeError(err));
      renderSummary();
    }
  })();
});

void refreshAll();
setInterval(() => {
  // background reconciliation keeps the view at server truth even if
  // another client mutates the run
  if (document.visibilityState === "visible") void refreshAll();
}, 15000);
