import init, { fieldBracket, hamiltonianFlow, frameComparison } from "./pkg/affgeo_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, text, failed) {
  const el = $(id);
  el.textContent = text;
  el.className = failed ? "out err" : "out";
}

function attempt(outId, f) {
  try {
    f();
  } catch (e) {
    show(outId, String(e.message ?? e), true);
  }
}

function bounds(points) {
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const [x, y] of points) {
    x0 = Math.min(x0, x); x1 = Math.max(x1, x);
    y0 = Math.min(y0, y); y1 = Math.max(y1, y);
  }
  const pad = (a, b) => (b - a || 1) * 0.05;
  return [x0 - pad(x0, x1), x1 + pad(x0, x1), y0 - pad(y0, y1), y1 + pad(y0, y1)];
}

// Each series is { points: [[x, y], ...], color, dash }.
function plot(canvas, series, square) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  let [x0, x1, y0, y1] = bounds(series.flatMap((s) => s.points));
  if (square) {
    const half = Math.max(x1 - x0, y1 - y0) / 2;
    const [cx, cy] = [(x0 + x1) / 2, (y0 + y1) / 2];
    [x0, x1, y0, y1] = [cx - half, cx + half, cy - half, cy + half];
  }
  const sx = (x) => ((x - x0) / (x1 - x0)) * w;
  const sy = (y) => h - ((y - y0) / (y1 - y0)) * h;
  ctx.strokeStyle = "#eee";
  ctx.beginPath();
  ctx.moveTo(0, sy(0)); ctx.lineTo(w, sy(0));
  ctx.moveTo(sx(0), 0); ctx.lineTo(sx(0), h);
  ctx.stroke();
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1.5;
    ctx.setLineDash(s.dash ?? []);
    ctx.beginPath();
    s.points.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function bracket() {
  attempt("br-out", () => {
    show("br-out", "[X, Y] = " + fieldBracket($("br-base").value, $("br-x").value, $("br-y").value));
  });
}

function flow() {
  attempt("fl-out", () => {
    const f = JSON.parse(hamiltonianFlow($("fl-h").value, num("fl-q"), num("fl-t"), num("fl-p"), num("fl-step"), num("fl-dur")));
    const zip = (ys) => f.t.map((t, i) => [t, ys[i]]);
    plot($("fl-plot"), [
      { points: zip(f.q), color: "#1f77b4" },
      { points: zip(f.p), color: "#ff7f0e" },
      { points: zip(f.energy), color: "#2ca02c", dash: [4, 3] },
    ]);
    const last = f.t.length - 1;
    show("fl-out", `blue q, orange p, green dashed H\nq(${f.t[last].toFixed(3)}) = ${f.q[last].toExponential(6)}, p = ${f.p[last].toExponential(6)}`);
  });
}

function frames() {
  attempt("fr-out", () => {
    const r = JSON.parse(frameComparison($("fr-phi").value, num("fr-m"), num("fr-x1"), num("fr-x2"),
      num("fr-p1"), num("fr-p2"), num("fr-v1"), num("fr-v2"), num("fr-step"), num("fr-dur")));
    plot($("fr-plot"), [
      { points: r.rest, color: "#1f77b4", width: 4 },
      { points: r.boosted, color: "#d62728", dash: [5, 4] },
    ], true);
    show("fr-out", `blue rest frame, red dashed boosted frame\n` +
      `max event deviation ${r.max_deviation.toExponential(2)}, clock residual ${r.clock_residual.toExponential(2)}: ` +
      (r.pass ? "same world-line" : "world-lines differ"), !r.pass);
  });
}

await init();
$("br-run").onclick = bracket;
$("fl-run").onclick = flow;
$("fr-run").onclick = frames;
bracket();
flow();
frames();
