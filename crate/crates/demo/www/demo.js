// Build the bindings first (see the repository README):
//   wasm-bindgen --target web --out-dir crates/demo/www/pkg \
//     target/wasm32-unknown-unknown/release/amemnet_demo.wasm
import init, { Demo } from "./pkg/amemnet_demo.js";

const $ = (id) => document.getElementById(id);
const COLORS = { rgb: "#d62728", flow: "#1f77b4", baseline: "#7f7f7f", fused: "#2ca02c" };
let demo = null;

function lineChart(canvas, legend, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 40, r: 10, t: 10, b: 25 };
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const y = pad.t + (h - pad.t - pad.b) * (1 - i / 4);
    ctx.beginPath(); ctx.moveTo(pad.l, y); ctx.lineTo(w - pad.r, y); ctx.stroke();
    ctx.fillText((i / 4).toFixed(2), 5, y + 4);
  }
  const n = series[0].values.length;
  const x = (i) => pad.l + (w - pad.l - pad.r) * (i / (n - 1));
  const y = (v) => pad.t + (h - pad.t - pad.b) * (1 - v);
  for (let i = 0; i < n; i++) ctx.fillText(((i + 1) / n).toFixed(1), x(i) - 8, h - 8);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.setLineDash(s.dashed ? [5, 4] : []);
    ctx.beginPath();
    s.values.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
  legend.innerHTML = series
    .map((s) => `<span style="color:${s.color}">&#9632; ${s.name}</span>`)
    .join("");
}

function barChart(canvas, values) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const max = Math.max(...values, 1e-9);
  const bw = (w - 20) / values.length;
  ctx.font = "10px sans-serif";
  values.forEach((v, i) => {
    const bh = (h - 30) * (v / max);
    ctx.fillStyle = "#9467bd";
    ctx.fillRect(10 + i * bw + 1, h - 20 - bh, bw - 2, bh);
    ctx.fillStyle = "#444";
    if (values.length <= 64) ctx.fillText(String(i), 10 + i * bw + bw / 2 - 4, h - 6);
  });
  ctx.fillText(`max ${max.toFixed(3)}`, w - 70, 12);
}

function drawAccuracy() {
  lineChart($("acc"), $("acc-legend"), [
    { name: "AMemNet rgb", color: COLORS.rgb, values: Array.from(demo.accuracy("rgb")) },
    { name: "AMemNet flow", color: COLORS.flow, values: Array.from(demo.accuracy("flow")) },
    { name: "linear head on partial rgb", color: COLORS.baseline, dashed: true, values: Array.from(demo.baseline()) },
  ]);
}

function drawAttention() {
  const stream = $("stream").value;
  const id = Number($("sample").value);
  const p = Number($("progress").value);
  $("pval").textContent = p;
  barChart($("att"), Array.from(demo.attention(stream, id, p)));
  const probs = Array.from(demo.probabilities(stream, id, p));
  const best = probs.indexOf(Math.max(...probs));
  $("pred").textContent =
    `true class ${demo.label(id)}, predicted ${best} ` +
    `(p = ${probs.map((v) => v.toFixed(2)).join(", ")})`;
}

function drawFusion() {
  const beta = Number($("beta").value);
  $("bval").textContent = beta.toFixed(2);
  lineChart($("fuse"), $("fuse-legend"), [
    { name: "rgb", color: COLORS.rgb, dashed: true, values: Array.from(demo.accuracy("rgb")) },
    { name: "flow", color: COLORS.flow, dashed: true, values: Array.from(demo.accuracy("flow")) },
    { name: `rgb + ${beta.toFixed(2)} flow`, color: COLORS.fused, values: Array.from(demo.fused(beta)) },
  ]);
}

function train() {
  $("status").textContent = "training…";
  // Let the status repaint before the blocking call.
  setTimeout(() => {
    try {
      const t = performance.now();
      if (demo) demo.free();
      demo = new Demo(
        Number($("seed").value),
        Number($("slots").value),
        Number($("lrec").value),
        Number($("epochs").value),
        Number($("lr").value),
      );
      const ids = Array.from(demo.test_ids());
      $("sample").innerHTML = ids.map((id) => `<option value="${id}">#${id} (class ${demo.label(id)})</option>`).join("");
      drawAccuracy();
      drawAttention();
      drawFusion();
      $("status").textContent = `trained in ${((performance.now() - t) / 1000).toFixed(1)}s`;
    } catch (e) {
      $("status").textContent = `error: ${e.message ?? e}`;
    }
  }, 20);
}

await init();
$("train").addEventListener("click", train);
for (const id of ["stream", "sample", "progress"]) $(id).addEventListener("input", () => demo && drawAttention());
$("beta").addEventListener("input", () => demo && drawFusion());
train();
