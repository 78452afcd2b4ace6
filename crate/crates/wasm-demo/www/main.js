import init, { estimateSubspace, phaseTransition, restoreColumn } from "./pkg/upca_wasm.js";

const field = (id) => {
  const root = document.getElementById(id);
  const get = (name) => root.querySelector(`[name=${name}]`).value;
  return { root, get, num: (name) => Number(get(name)), big: (name) => BigInt(get(name)) };
};

const guard = (out, f) => {
  try {
    f();
  } catch (e) {
    out.textContent = `error: ${e.message ?? e}`;
  }
};

function shade(theta) {
  // 0° white, 90° black
  const v = Math.round(255 * (1 - Math.min(theta, 90) / 90));
  return `rgb(${v},${v},${v})`;
}

function heatmap(res) {
  const table = document.createElement("table");
  table.className = "heat";
  for (let i = res.ranks.length - 1; i >= 0; i--) {
    const tr = table.insertRow();
    tr.insertCell().textContent = `r=${res.ranks[i]}`;
    res.theta[i].forEach((t) => {
      const td = tr.insertCell();
      td.style.background = t === null ? "#000" : shade(t);
      td.style.color = t !== null && t > 45 ? "#fff" : "#000";
      td.textContent = t === null ? "n/a" : t.toFixed(1);
    });
  }
  const foot = table.insertRow();
  foot.insertCell();
  res.ratios.forEach((r) => (foot.insertCell().textContent = r));
  return table;
}

function plot(canvas, res) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = [...res.x_star, ...res.x_tilde, ...res.x_hat];
  const lo = Math.min(...all), hi = Math.max(...all);
  const m = res.x_star.length;
  const x = (i) => 10 + (i * (w - 20)) / Math.max(m - 1, 1);
  const y = (v) => h - 10 - ((v - lo) * (h - 20)) / (hi - lo || 1);
  const line = (v, color) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    v.forEach((e, i) => (i ? ctx.lineTo(x(i), y(e)) : ctx.moveTo(x(i), y(e))));
    ctx.stroke();
  };
  line(res.x_star, "#000");
  line(res.x_tilde, "#d22");
  ctx.fillStyle = "#22d";
  res.x_hat.forEach((e, i) => ctx.fillRect(x(i) - 2, y(e) - 2, 4, 4));
}

await init();

{
  const f = field("s1");
  const out = f.root.querySelector(".out");
  f.root.querySelector("button").onclick = () =>
    guard(out, () => {
      const res = JSON.parse(
        estimateSubspace(f.num("m"), f.num("n"), f.num("r"), f.num("ratio"), f.num("alpha"), f.get("method"), f.big("seed")),
      );
      out.textContent =
        `θ_max = ${res.theta_max_deg.toExponential(3)}°\n` +
        `iterations = ${res.iterations}, objective = ${res.objective.toFixed(4)}\n` +
        `realized α = ${res.realized_alpha.toFixed(3)}`;
    });
}

{
  const f = field("pt");
  const out = f.root.querySelector(".out");
  f.root.querySelector("button").onclick = () =>
    guard(out, () => {
      const res = JSON.parse(
        phaseTransition(f.num("m"), f.num("n"), f.get("ranks"), f.get("ratios"), f.num("alpha"), f.num("trials"), f.get("method"), f.big("seed")),
      );
      out.replaceChildren(heatmap(res));
    });
}

{
  const f = field("col");
  const out = f.root.querySelector(".out");
  const canvas = f.root.querySelector("canvas");
  f.root.querySelector("button").onclick = () =>
    guard(out, () => {
      const res = JSON.parse(restoreColumn(f.num("m"), f.num("r"), f.num("alpha"), f.get("method"), f.big("seed")));
      plot(canvas, res);
      out.textContent = `moved coordinates: ${res.moved.join(", ") || "none"}\nrelative error = ${res.rel_error.toExponential(3)}`;
    });
}
