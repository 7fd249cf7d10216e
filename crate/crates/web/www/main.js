import init, { Demo } from "./pkg/swarmdyn_web.js";

const COLORS = ["#e6194b", "#3cb44b", "#ffe119", "#0082c8", "#f58230", "#911eb4", "#46f0f0", "#f032e6"];
const $ = (id) => document.getElementById(id);
let demo = null;
let selected = null;

function rebuild() {
  const opposite = document.querySelector("input[name=variant]:checked").value === "opposite";
  demo?.free();
  demo = new Demo(opposite, Number($("seed").value) >>> 0);
  $("t").max = demo.frames();
  draw();
  describe();
}

function draw() {
  const t = Number($("t").value);
  $("tval").textContent = t;
  const cv = $("frame");
  const ctx = cv.getContext("2d");
  const px = demo.frame_rgba(t, $("outline").checked);
  ctx.putImageData(new ImageData(new Uint8ClampedArray(px), demo.width(), demo.height()), 0, 0);
}

function describe() {
  const cv = $("desc");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  if (selected === null) return;
  const t = Number($("t").value);
  const f = demo.descriptor(t, selected, Number($("bins").value));
  $("desc-title").textContent = f.length ? `descriptor of element ${selected}, frame ${t}` : `element ${selected} absent`;
  if (!f.length) return;
  const max = Math.max(...f.map(Math.abs)) || 1;
  const w = cv.width / f.length;
  const mid = cv.height / 2;
  ctx.fillStyle = COLORS[selected % COLORS.length];
  f.forEach((v, i) => {
    const h = (v / max) * (mid - 4);
    ctx.fillRect(i * w, mid - Math.max(h, 0), Math.max(w - 1, 1), Math.abs(h));
  });
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(0, mid);
  ctx.lineTo(cv.width, mid);
  ctx.stroke();
}

function scatter(a) {
  const cv = $("mds");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  const xs = a.mds.map((p) => p[0]);
  const ys = a.mds.map((p) => p[1]);
  const span = (v) => [Math.min(...v), Math.max(...v) - Math.min(...v) || 1];
  const [x0, dx] = span(xs);
  const [y0, dy] = span(ys);
  a.mds.forEach(([x, y], i) => {
    const cx = 20 + ((x - x0) / dx) * (cv.width - 40);
    const cy = cv.height - 20 - ((y - y0) / dy) * (cv.height - 40);
    ctx.fillStyle = a.clusters[i] === 0 ? "#0082c8" : "#e6194b";
    ctx.beginPath();
    if (a.shapes[i] === "leaf") ctx.arc(cx, cy, 6, 0, 2 * Math.PI);
    else ctx.rect(cx - 6, cy - 6, 12, 12);
    ctx.fill();
    ctx.fillStyle = "#222";
    ctx.fillText(`e${a.elements[i]}`, cx + 8, cy + 4);
  });
}

function curves(a) {
  const cv = $("zeta");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  const series = [["zeta_R", a.zeta_r, "#3cb44b"], ["zeta_S", a.zeta_s, "#0082c8"], ["zeta_T", a.zeta_t, "#e6194b"]];
  const all = series.flatMap((s) => s[1]).filter(Number.isFinite);
  const max = Math.max(...all, 1e-12);
  series.forEach(([name, v, color], k) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    v.forEach((y, i) => {
      const cx = 10 + (i / Math.max(v.length - 1, 1)) * (cv.width - 20);
      const cy = cv.height - 10 - (y / max) * (cv.height - 30);
      i ? ctx.lineTo(cx, cy) : ctx.moveTo(cx, cy);
    });
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(name, 10 + 60 * k, 12);
  });
}

function learn() {
  $("status").textContent = "learning...";
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const a = JSON.parse(demo.analyze(Number($("bins").value), Number($("kmax").value)));
      const ms = Math.round(performance.now() - t0);
      $("status").textContent = `${a.iterations} iterations${a.converged ? " (converged)" : ""}, ${ms} ms`;
      scatter(a);
      curves(a);
    } catch (e) {
      $("status").textContent = String(e);
    }
  }, 10);
}

$("frame").addEventListener("click", (ev) => {
  const cv = ev.currentTarget;
  const r = cv.getBoundingClientRect();
  const x = Math.floor(((ev.clientX - r.left) / r.width) * cv.width);
  const y = Math.floor(((ev.clientY - r.top) / r.height) * cv.height);
  const e = demo.element_at(Number($("t").value), x, y);
  selected = e < 0 ? null : e;
  describe();
});
$("t").addEventListener("input", () => { draw(); describe(); });
$("outline").addEventListener("change", draw);
$("bins").addEventListener("change", describe);
$("seed").addEventListener("change", rebuild);
document.querySelectorAll("input[name=variant]").forEach((r) => r.addEventListener("change", rebuild));
$("learn").addEventListener("click", learn);

await init();
rebuild();
