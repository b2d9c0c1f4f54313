import init, { propagate, precisionRecall, labelModel } from "./pkg/xmodal_demo.js";

const nodes = [
  [80, 80], [200, 60], [320, 110], [180, 200], [70, 260],
  [440, 70], [560, 140], [460, 220], [620, 260], [730, 120],
];
const edges = [
  [0, 1, 0.9], [1, 2, 0.6], [0, 3, 0.5], [3, 4, 0.8], [1, 3, 0.4],
  [2, 5, 0.3], [5, 6, 0.9], [6, 7, 0.7], [7, 8, 0.5], [6, 9, 0.8], [8, 9, 0.4],
];
// node index -> seed score
const seeds = new Map([[0, 1.0], [8, 0.0]]);

function color(s) {
  const r = Math.round(255 * (1 - s));
  const g = Math.round(160 * s + 60);
  return `rgb(${r},${g},90)`;
}

function drawGraph() {
  const canvas = document.getElementById("graph");
  const ctx = canvas.getContext("2d");
  const msg = document.getElementById("graph-msg");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let scores = nodes.map(() => 0.5);
  msg.textContent = "";
  if (seeds.size > 0) {
    try {
      scores = propagate(
        nodes.length,
        Float64Array.from(edges.flat()),
        Uint32Array.from(seeds.keys()),
        Float64Array.from(seeds.values()),
      );
    } catch (e) {
      msg.textContent = e.message ?? String(e);
      msg.className = "err";
    }
  } else {
    msg.textContent = "Add at least one seed.";
  }
  ctx.font = "12px sans-serif";
  for (const [i, j, w] of edges) {
    ctx.strokeStyle = "#999";
    ctx.lineWidth = 1 + 4 * w;
    ctx.beginPath();
    ctx.moveTo(...nodes[i]);
    ctx.lineTo(...nodes[j]);
    ctx.stroke();
  }
  nodes.forEach(([x, y], i) => {
    const seeded = seeds.has(i);
    ctx.fillStyle = color(scores[i]);
    ctx.beginPath();
    ctx.arc(x, y, 22, 0, 2 * Math.PI);
    ctx.fill();
    ctx.lineWidth = seeded ? 4 : 1;
    ctx.strokeStyle = "#222";
    ctx.stroke();
    ctx.fillStyle = "#000";
    ctx.textAlign = "center";
    ctx.fillText(scores[i].toFixed(2), x, y + 4);
  });
}

document.getElementById("graph").addEventListener("click", (ev) => {
  const rect = ev.target.getBoundingClientRect();
  const x = ev.clientX - rect.left;
  const y = ev.clientY - rect.top;
  const i = nodes.findIndex(([nx, ny]) => Math.hypot(nx - x, ny - y) < 24);
  if (i < 0) return;
  if (!seeds.has(i)) seeds.set(i, 1.0);
  else if (seeds.get(i) === 1.0) seeds.set(i, 0.0);
  else seeds.delete(i);
  drawGraph();
});

function rows(text) {
  return text
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0)
    .map((l) => l.split(/[\s,]+/).map(Number));
}

function drawCurve(curve) {
  const canvas = document.getElementById("pr-curve");
  const ctx = canvas.getContext("2d");
  const pad = 30;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#444";
  ctx.fillText("recall", pad + w / 2 - 15, canvas.height - 8);
  ctx.fillText("precision", 2, pad - 8);
  ctx.strokeStyle = "#2a6";
  ctx.lineWidth = 2;
  ctx.beginPath();
  curve.forEach(([r, p], k) => {
    const px = pad + r * w;
    const py = pad + (1 - p) * h;
    if (k === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

document.getElementById("pr-run").addEventListener("click", () => {
  const out = document.getElementById("pr-out");
  out.className = "";
  try {
    const data = rows(document.getElementById("pr-input").value);
    const res = JSON.parse(
      precisionRecall(Float64Array.from(data.map((r) => r[0])), Int8Array.from(data.map((r) => r[1]))),
    );
    out.textContent = `AUPRC = ${res.auprc.toFixed(6)}`;
    drawCurve(res.curve);
  } catch (e) {
    out.textContent = e.message ?? String(e);
    out.className = "err";
  }
});

document.getElementById("lm-run").addEventListener("click", () => {
  const out = document.getElementById("lm-out");
  out.className = "";
  try {
    const data = rows(document.getElementById("lm-input").value);
    const m = data[0].length;
    const res = JSON.parse(labelModel(m, Int8Array.from(data.flat())));
    let html = `<p>pi = ${res.pi.toFixed(3)}, ${res.iterations} EM iterations${res.converged ? "" : " (not converged)"}</p>`;
    html += "<table><tr><th>LF</th><th>accuracy</th><th>coverage</th></tr>";
    res.alpha.forEach((a, j) => {
      html += `<tr><td>${j}</td><td>${a.toFixed(3)}</td><td>${res.beta[j].toFixed(3)}</td></tr>`;
    });
    html += "</table><table><tr><th>row</th><th>votes</th><th>P(y = +1)</th></tr>";
    res.posterior.forEach((p, i) => {
      html += `<tr><td>${i}</td><td>${data[i].join(" ")}</td><td>${p.toFixed(3)}</td></tr>`;
    });
    out.innerHTML = html + "</table>";
  } catch (e) {
    out.textContent = e.message ?? String(e);
    out.className = "err";
  }
});

await init();
drawGraph();
document.getElementById("pr-run").click();
document.getElementById("lm-run").click();
