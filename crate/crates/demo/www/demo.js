import init, { conjugate_curve, check_problem, solve_problem } from "./pkg/selfdual_demo.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

// series: [{ x: [...], y: [...], color, dash }]
function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pts = series.flatMap((s) => s.x.map((x, i) => [x, s.y[i]]).filter(([, y]) => y !== null));
  if (pts.length === 0) return;
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const [x, y] of pts) {
    x0 = Math.min(x0, x); x1 = Math.max(x1, x);
    y0 = Math.min(y0, y); y1 = Math.max(y1, y);
  }
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const pad = 30;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.setLineDash([]);
  ctx.beginPath();
  if (y0 < 0 && y1 > 0) { ctx.moveTo(pad, sy(0)); ctx.lineTo(w - pad, sy(0)); }
  if (x0 < 0 && x1 > 0) { ctx.moveTo(sx(0), pad); ctx.lineTo(sx(0), h - pad); }
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText(y1.toPrecision(3), 2, pad);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - 8);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - 8);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash ? [6, 4] : []);
    ctx.beginPath();
    let pen = false;
    s.x.forEach((x, i) => {
      const y = s.y[i];
      if (y === null) { pen = false; return; }
      pen ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y));
      pen = true;
    });
    ctx.stroke();
  }
}

function showError(el, e) {
  el.className = "err";
  el.textContent = String(e.message ?? e);
}

function runConjugate() {
  const out = $("conj-out");
  try {
    const c = JSON.parse(conjugate_curve($("expr").value, Number($("lo").value), Number($("hi").value), 201));
    plot($("conj-plot"), [
      { x: c.x, y: c.f, color: COLORS[0] },
      { x: c.y, y: c.conj, color: COLORS[1] },
    ]);
    const gap = Math.max(...c.gap.filter((g) => g !== null).map(Math.abs));
    out.className = "";
    out.textContent = `max |f(x) + f*(f'(x)) - x f'(x)| = ${gap.toExponential(3)}`;
  } catch (e) {
    showError(out, e);
  }
}

function runCheck() {
  const out = $("out");
  try {
    const r = JSON.parse(check_problem($("config").value));
    out.className = "";
    out.textContent = (r.passed ? "all checks passed\n\n" : "some checks failed\n\n")
      + r.report.checks.map((c) => `${c.status.padEnd(20)} ${c.name}: ${c.detail}`).join("\n");
  } catch (e) {
    showError(out, e);
  }
}

function runSolve() {
  const out = $("out");
  $("busy").textContent = "solving...";
  // let the label paint before blocking
  setTimeout(() => {
    try {
      const r = JSON.parse(solve_problem($("config").value));
      const n = r.p[0].length;
      const series = [];
      for (let i = 0; i < n; i++) {
        series.push({ x: r.t, y: r.p.map((row) => row[i]), color: COLORS[i % 4] });
        series.push({ x: r.t, y: r.q.map((row) => row[i]), color: COLORS[i % 4], dash: true });
      }
      plot($("path-plot"), series);
      const c = r.report.certificate;
      out.className = "";
      out.textContent = [
        `status: ${r.report.status}`,
        `action: ${c.action_value.toExponential(3)} (tol ${r.report.tol_zero.toExponential(3)})`,
        `max interval residual: ${c.max_interior_residual.toExponential(3)}`,
        "",
        "stages:",
        ...r.report.stages.map((s) => `  ${s.kind} ${s.parameter ?? ""} action ${s.action.toExponential(3)} iters ${s.iters}`),
        ...(r.report.notes ?? []).map((n) => `note: ${n}`),
      ].join("\n");
    } catch (e) {
      showError(out, e);
    }
    $("busy").textContent = "";
  }, 10);
}

await init();
$("conj").onclick = runConjugate;
$("check").onclick = runCheck;
$("solve").onclick = runSolve;
runConjugate();
