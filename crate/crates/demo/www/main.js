import init, { segmentPlane, segmentLine, mergeFactor } from "./pkg/vblocks_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Log-scaled density to a blue-to-yellow ramp.
function color(d, lo, hi) {
  const t = hi > lo ? Math.min(1, Math.max(0, (Math.log(d) - lo) / (hi - lo))) : 0.5;
  const r = Math.round(30 + 225 * t);
  const g = Math.round(40 + 180 * t);
  const b = Math.round(120 * (1 - t) + 40);
  return `rgb(${r},${g},${b})`;
}

function drawPlane() {
  const out = $("p-stats");
  let v;
  try {
    v = JSON.parse(segmentPlane(BigInt(num("p-seed")), num("p-bg"), num("p-mult"), num("p-q"), num("p-thr")));
  } catch (e) {
    out.innerHTML = `<span class="err">${e}</span>`;
    return;
  }
  const cv = $("p-canvas");
  const ctx = cv.getContext("2d");
  const [bx, by] = v.bounds;
  const sx = cv.width / (bx.hi - bx.lo);
  const sy = cv.height / (by.hi - by.lo);
  const X = (x) => (x - bx.lo) * sx;
  const Y = (y) => cv.height - (y - by.lo) * sy;

  const logs = v.blocks.map((b) => Math.log(b.density));
  const lo = Math.min(...logs);
  const hi = Math.max(...logs);
  ctx.clearRect(0, 0, cv.width, cv.height);
  const edges = $("p-cells").checked;
  v.cells.forEach((poly, i) => {
    const b = v.blocks[v.cell_block[i]];
    ctx.beginPath();
    poly.forEach(([x, y], k) => (k ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
    ctx.closePath();
    ctx.fillStyle = color(b.density, lo, hi);
    ctx.fill();
    if (edges) {
      ctx.strokeStyle = "rgba(0,0,0,0.15)";
      ctx.stroke();
    }
  });
  ctx.fillStyle = "rgba(0,0,0,0.55)";
  for (const [x, y] of v.points) ctx.fillRect(X(x) - 1, Y(y) - 1, 2, 2);
  ctx.strokeStyle = "#fff";
  ctx.setLineDash([4, 4]);
  for (const h of v.hotspots) {
    if (h.shape.kind !== "disk") continue;
    ctx.beginPath();
    ctx.arc(X(h.center[0]), Y(h.center[1]), h.shape.radius * sx, 0, 2 * Math.PI);
    ctx.stroke();
  }
  ctx.setLineDash([]);
  ctx.fillStyle = "#e00";
  for (const c of v.clusters) {
    ctx.beginPath();
    ctx.arc(X(c.centroid[0]), Y(c.centroid[1]), 5, 0, 2 * Math.PI);
    ctx.fill();
  }
  const lines = [
    `${v.points.length} points`,
    `${v.blocks.length} blocks after ${v.merges} merges`,
    `${v.clusters.length} clusters`,
    `background ${v.background_density.toFixed(2)} / unit²`,
    `log posterior ${v.total_log_posterior.toFixed(3)}`,
    "",
    ...v.clusters.map(
      (c) => `cluster ${c.id}: ${c.n_points} pts at (${c.centroid[0].toFixed(2)}, ${c.centroid[1].toFixed(2)})`
    ),
  ];
  out.textContent = lines.join("\n");
}

function drawLine() {
  const out = $("l-stats");
  let v;
  try {
    v = JSON.parse(segmentLine(BigInt(num("l-seed")), num("l-rate"), num("l-step"), num("l-q")));
  } catch (e) {
    out.innerHTML = `<span class="err">${e}</span>`;
    return;
  }
  const cv = $("l-canvas");
  const ctx = cv.getContext("2d");
  const pad = 20;
  const w = cv.width - 2 * pad;
  const h = cv.height - 2 * pad - 20;
  const X = (x) => pad + ((x - v.bounds.lo) / (v.bounds.hi - v.bounds.lo)) * w;
  const top = Math.max(...v.blocks.map((b) => b.density));
  const Y = (d) => pad + h - (d / top) * h;
  ctx.clearRect(0, 0, cv.width, cv.height);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad + h);
  ctx.lineTo(pad + w, pad + h);
  ctx.stroke();
  ctx.strokeStyle = "#1f5fbf";
  ctx.lineWidth = 2;
  ctx.beginPath();
  v.blocks.forEach((b, k) => {
    if (k === 0) ctx.moveTo(X(b.lo), Y(b.density));
    else ctx.lineTo(X(b.lo), Y(b.density));
    ctx.lineTo(X(b.hi), Y(b.density));
  });
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.strokeStyle = "rgba(0,0,0,0.5)";
  for (const t of v.points) {
    ctx.beginPath();
    ctx.moveTo(X(t), cv.height - pad - 12);
    ctx.lineTo(X(t), cv.height - pad);
    ctx.stroke();
  }
  out.textContent =
    `${v.points.length} events, ${v.blocks.length} blocks, log posterior ${v.total_log_posterior.toFixed(3)}\n` +
    v.blocks.map((b) => `[${b.lo.toFixed(2)}, ${b.hi.toFixed(2)}]  N=${b.n_points}  rate ${b.density.toFixed(3)}`).join("\n");
}

function explore() {
  const [l1, l2, lm, f] = mergeFactor(num("m-n1"), num("m-v1"), num("m-n2"), num("m-v2"));
  const fmt = (x) => (Number.isNaN(x) ? "outside domain (need V > N - 1)" : x.toFixed(6));
  $("m-out").textContent = [
    `ln Φ(N₁, V₁)        ${fmt(l1)}`,
    `ln Φ(N₂, V₂)        ${fmt(l2)}`,
    `ln Φ(merged)        ${fmt(lm)}`,
    `log merge factor    ${fmt(f)}`,
    Number.isNaN(f) ? "" : f > 0 ? "merge favored" : "keep separate",
  ].join("\n");
}

await init();
$("p-run").addEventListener("click", drawPlane);
$("p-cells").addEventListener("change", drawPlane);
$("l-run").addEventListener("click", drawLine);
for (const id of ["m-n1", "m-v1", "m-n2", "m-v2"]) $(id).addEventListener("input", explore);
drawPlane();
drawLine();
explore();
