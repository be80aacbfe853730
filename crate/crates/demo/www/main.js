import init, { quantizer_curve, water_fill_profile, nmse_sweep } from "./pkg/ris_tq_demo.js";

const COLORS = { task_based: "#c0392b", no_quant: "#222", digital_only: "#2471a3" };

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const pad = 30;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toFixed(2), 2, pad + 4);
  ctx.fillText(y0.toFixed(2), 2, h - pad);
  ctx.fillText(String(x0), pad, h - 10);
  ctx.fillText(String(x1), w - pad - 20, h - 10);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color || "#333";
    ctx.fillStyle = s.color || "#333";
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.y[i])) : ctx.moveTo(sx(x), sy(s.y[i]))));
    ctx.stroke();
    if (opts.markers) s.x.forEach((x, i) => ctx.fillRect(sx(x) - 2, sy(s.y[i]) - 2, 4, 4));
    if (s.label) ctx.fillText(s.label, w - pad - 90, pad + 14 * (k + 1));
  });
}

function drawCurve() {
  const levels = Number(document.getElementById("levels").value);
  document.getElementById("levels-out").textContent = levels;
  const c = JSON.parse(quantizer_curve(levels, 601));
  plot(document.getElementById("curve"), [
    { x: c.input, y: c.input, color: "#bbb" },
    { x: c.input, y: c.output, color: "#c0392b" },
  ]);
}

function drawProfile() {
  const seed = BigInt(document.getElementById("seed").value || 0);
  const bits = Number(document.getElementById("wf-bits").value);
  const info = document.getElementById("wf-info");
  try {
    const p = JSON.parse(water_fill_profile(seed, bits));
    const idx = p.lambda_sq.map((_, i) => i + 1);
    plot(document.getElementById("wf"), [{ x: idx, y: p.lambda_sq, color: "#2471a3" }], { markers: true });
    info.textContent =
      `bits per ADC ${p.bits_per_adc.toFixed(2)}\n` +
      `MMSE ${p.mmse.toExponential(3)}, quantization MSE ${p.predicted_mse.toExponential(3)}`;
  } catch (e) {
    info.textContent = String(e);
  }
}

function runSweep() {
  const trials = Number(document.getElementById("trials").value);
  const info = document.getElementById("sweep-info");
  info.textContent = "running...";
  setTimeout(() => {
    try {
      const bits = new Float64Array([16, 32, 48, 64, 96, 128, 256, 512]);
      const rows = JSON.parse(nmse_sweep(bits, trials, 1n));
      const series = Object.keys(COLORS).map((name) => {
        const r = rows.filter((p) => p.estimator === name);
        return { label: name, color: COLORS[name], x: r.map((p) => Math.log2(p.total_bits)), y: r.map((p) => p.nmse_db) };
      });
      plot(document.getElementById("sweep"), series, { markers: true });
      info.textContent = "x: log2(total bits), y: NMSE [dB]\n" +
        rows.map((p) => `${p.estimator} ${p.total_bits} ${p.nmse_db.toFixed(2)}`).join("\n");
    } catch (e) {
      info.textContent = String(e);
    }
  }, 10);
}

await init();
document.getElementById("levels").addEventListener("input", drawCurve);
document.getElementById("wf-run").addEventListener("click", drawProfile);
document.getElementById("sweep-run").addEventListener("click", runSweep);
drawCurve();
drawProfile();
