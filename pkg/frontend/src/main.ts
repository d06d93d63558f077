// Page bootstrap: scene canvas, heatmap canvas, one button per motion,
// perturb/pause/reset controls, reconnect banner.

import { SteeringClient } from "./client.js";
import { fetchQualityGrid } from "./protocol.js";
import { defaultViewport, drawHeatmap, drawScene } from "./render.js";
import { ViewModel } from "./viewmodel.js";

const params = new URLSearchParams(location.search);
const server = params.get("server") ?? `${location.hostname}:8720`;
const wsUrl = `ws://${server}/ws`;
const httpBase = `http://${server}`;

const vm = new ViewModel();
const client = new SteeringClient(wsUrl, vm, (url) => new WebSocket(url));

const scene = document.getElementById("scene") as HTMLCanvasElement;
const heat = document.getElementById("heatmap") as HTMLCanvasElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const buttons = document.getElementById("buttons") as HTMLDivElement;
const errorBox = document.getElementById("errors") as HTMLDivElement;
const pairSelect = document.getElementById("pair") as HTMLSelectElement;

const sceneCtx = scene.getContext("2d")!;
const heatCtx = heat.getContext("2d")!;
const vp = { ...defaultViewport, width: scene.width, height: scene.height };

let buttonsBuilt = false;
let gridFetchToken = 0;

function rebuildControls(): void {
  if (buttonsBuilt || !vm.hello) return;
  buttonsBuilt = true;
  for (const motion of vm.hello.vocabulary) {
    const b = document.createElement("button");
    b.textContent = motion;
    b.onclick = () => { if (client.connected) client.setMotion(motion); };
    buttons.appendChild(b);
  }
  const perturb = document.createElement("button");
  perturb.textContent = "Perturb";
  perturb.onclick = () => { if (client.connected) client.perturb(0.3, 0.0); };
  buttons.appendChild(perturb);
  const pause = document.createElement("button");
  pause.textContent = "Pause";
  let paused = false;
  pause.onclick = () => {
    if (!client.connected) return;
    paused = !paused;
    if (paused) client.pause(); else client.resume();
    pause.textContent = paused ? "Resume" : "Pause";
  };
  buttons.appendChild(pause);
  const reset = document.createElement("button");
  reset.textContent = "Reset";
  reset.onclick = () => { if (client.connected) client.reset(); };
  buttons.appendChild(reset);

  const names = vm.hello.vocabulary;
  for (const m of names) {
    for (const n of names) {
      if (m === n) continue;
      const opt = document.createElement("option");
      opt.value = `${m}:${n}`;
      opt.textContent = `${m} → ${n}`;
      pairSelect.appendChild(opt);
    }
  }
  pairSelect.onchange = () => {
    const [m, n] = pairSelect.value.split(":");
    vm.selectPair(m, n);
    refreshGrid();
  };
  if (vm.selectedPair) {
    pairSelect.value = vm.selectedPair.join(":");
    refreshGrid();
  }
}

async function refreshGrid(): Promise<void> {
  if (!vm.selectedPair) return;
  const token = ++gridFetchToken;
  try {
    const grid = await fetchQualityGrid(httpBase, vm.selectedPair[0],
                                        vm.selectedPair[1]);
    if (token === gridFetchToken) vm.setGrid(grid);
  } catch {
    // leave the heatmap in its loading state; a pair may be unpopulated
  }
}

client.onchange = () => {
  banner.style.display = vm.connection === "connected" ? "none" : "block";
  banner.textContent = vm.connection === "connecting"
    ? "connecting..." : "disconnected - retrying";
  rebuildControls();
  errorBox.textContent = vm.lastError ?? "";
};

function paint(): void {
  drawScene(sceneCtx, vp, vm);
  drawHeatmap(heatCtx, heat.width, vm);
  requestAnimationFrame(paint);
}

client.connect();
requestAnimationFrame(paint);
