// Canvas drawing.  Everything renders through the Ctx2D subset below so
// tests can run against a recording stub instead of a real canvas.

import { Frame } from "./protocol.js";
import { ViewModel } from "./viewmodel.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Viewport {
  width: number;
  height: number;
  metersAcross: number;  // world meters mapped to the canvas width
  groundFrac: number;    // ground line as a fraction of canvas height
}

export const defaultViewport: Viewport = {
  width: 900, height: 420, metersAcross: 8, groundFrac: 0.82,
};

export function worldToScreen(vp: Viewport, camX: number, x: number,
                              z: number): [number, number] {
  const scale = vp.width / vp.metersAcross;
  return [
    vp.width / 2 + (x - camX) * scale,
    vp.height * vp.groundFrac - z * scale,
  ];
}

export function drawScene(ctx: Ctx2D, vp: Viewport, vm: ViewModel): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, vp.width, vp.height);
  const f = vm.latest;
  if (!f || !vm.hello) return;
  const camX = f.x;
  const scale = vp.width / vp.metersAcross;

  // terrain segments with gaps between them
  ctx.fillStyle = "#3d5a3d";
  for (const [x0, x1, h] of vm.hello.terrain.segments) {
    const [sx0, sy] = worldToScreen(vp, camX, x0, h);
    const [sx1] = worldToScreen(vp, camX, x1, h);
    if (sx1 < -40 || sx0 > vp.width + 40) continue;
    ctx.fillRect(Math.max(sx0, -40), sy, Math.min(sx1, vp.width + 40) - Math.max(sx0, -40),
                 vp.height - sy);
  }

  // apex trail
  ctx.fillStyle = "rgba(240,200,80,0.55)";
  for (const apex of vm.apexTrail()) {
    const [ax, az] = worldToScreen(vp, camX, apex.x, apex.z);
    ctx.fillRect(ax - 2, az - 2, 4, 4);
  }

  // leg: in stance from the mass to the anchored foot, in flight along
  // the commanded angle (unit leg below the mass)
  const [mx, mz] = worldToScreen(vp, camX, f.x, f.z);
  ctx.strokeStyle = f.alive ? "#9ecbff" : "#ff6b6b";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(mx, mz);
  if (f.mode === "stance" && f.foot_x !== null) {
    const [fx, fz] = worldToScreen(vp, camX, f.foot_x, 0);
    ctx.lineTo(fx, fz);
  } else {
    ctx.lineTo(mx, mz + scale * 1.0);
  }
  ctx.stroke();

  // point mass
  ctx.fillStyle = f.alive ? "#e8eefc" : "#ff6b6b";
  ctx.beginPath();
  ctx.arc(mx, mz, 9, 0, Math.PI * 2);
  ctx.fill();

  // labels
  ctx.fillStyle = "#e8eefc";
  ctx.font = "16px system-ui";
  ctx.fillText(`${f.motion}${f.measuring ? " (transitioning)" : ""}`, 14, 24);
  ctx.fillText(`t=${f.t.toFixed(2)}s  x=${f.x.toFixed(2)}m  vx=${f.vx.toFixed(2)}m/s`, 14, 46);
  if (!f.alive) ctx.fillText("FALLEN - press reset", 14, 68);

  drawPhaseDial(ctx, vp, f);
}

export function drawPhaseDial(ctx: Ctx2D, vp: Viewport, f: Frame): void {
  const cx = vp.width - 58, cy = 58, r = 34;
  ctx.strokeStyle = "#5b6575";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(cx, cy, r, 0, Math.PI * 2);
  ctx.stroke();
  const ang = f.phase * Math.PI * 2 - Math.PI / 2;
  ctx.strokeStyle = "#e8eefc";
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + r * Math.cos(ang), cy + r * Math.sin(ang));
  ctx.stroke();
  if (f.pending) {
    // marker at the planned switch phase (the bin center)
    const bins = 20;
    const phiStar = (f.pending.phi_bin + 0.5) / bins;
    const pang = phiStar * Math.PI * 2 - Math.PI / 2;
    ctx.fillStyle = "#f0c850";
    ctx.beginPath();
    ctx.arc(cx + r * Math.cos(pang), cy + r * Math.sin(pang), 5, 0, Math.PI * 2);
    ctx.fill();
  }
}

export function heatColor(v: number, vmax: number): string {
  if (vmax <= 0) return "rgb(24,28,38)";
  const t = Math.max(0, Math.min(1, v / vmax));
  const r = Math.round(24 + t * 220);
  const g = Math.round(28 + t * 160);
  const b = Math.round(38 + t * 30);
  return `rgb(${r},${g},${b})`;
}

export function drawHeatmap(ctx: Ctx2D, size: number, vm: ViewModel): void {
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, size, size + 28);
  const grid = vm.grid;
  if (!grid) {
    ctx.fillStyle = "#8892a4";
    ctx.font = "13px system-ui";
    ctx.fillText("loading grid...", 8, size / 2);
    return;
  }
  const b = grid.bins;
  const cell = size / b;
  let vmax = 0;
  for (const row of grid.q) for (const v of row) vmax = Math.max(vmax, v);
  for (let pb = 0; pb < b; pb++) {
    for (let ob = 0; ob < b; ob++) {
      ctx.fillStyle = heatColor(grid.q[pb][ob], vmax);
      // phi on the x axis, omega on the y axis (origin bottom-left)
      ctx.fillRect(pb * cell, size - (ob + 1) * cell, cell + 0.5, cell + 0.5);
    }
  }
  // outline the planned cell when the pending pair matches the view
  const f = vm.latest;
  if (f && f.pending && vm.selectedPair
      && f.motion === vm.selectedPair[0]
      && f.pending.target === vm.selectedPair[1]) {
    ctx.strokeStyle = "#f0c850";
    ctx.lineWidth = 2;
    ctx.strokeRect(f.pending.phi_bin * cell,
                   size - (f.pending.omega_bin + 1) * cell, cell, cell);
  }
  ctx.fillStyle = "#8892a4";
  ctx.font = "13px system-ui";
  ctx.fillText(`${grid.m} → ${grid.n}   (x: source phase, y: target phase)`,
               6, size + 18);
}
