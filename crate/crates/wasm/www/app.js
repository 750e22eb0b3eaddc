// Demo page driver: loads the wasm module and wires the three panels.

let wasm = null;

async function boot() {
  try {
    const mod = await import("./pkg/barovort_wasm.js");
    await mod.default();
    wasm = mod;
  } catch (e) {
    document.getElementById("loadnote").hidden = false;
    console.error(e);
    return;
  }
  runLorenz();
  drawRossby();
  runReduce();
}

function val(id) {
  return parseFloat(document.getElementById(id).value);
}

function sizeCanvas(canvas) {
  const dpr = window.devicePixelRatio || 1;
  const width = canvas.clientWidth * dpr;
  if (canvas.width !== width) {
    canvas.width = width;
    canvas.height = canvas.getAttribute("height") * dpr;
  }
  return canvas.getContext("2d");
}

// ---- panel 1: Lorenz 1960 ------------------------------------------------

const SERIES_COLORS = ["#e8744f", "#5fb3e8", "#8fce6b"];

function runLorenz() {
  if (!wasm) return;
  const tEnd = Math.max(1, val("lz-t"));
  const out = JSON.parse(wasm.lorenz_trajectory_json(
    val("lz-k"), val("lz-l"), val("lz-a"), val("lz-f"), val("lz-g"),
    1e-3, tEnd, Math.max(1, Math.round(tEnd / 1e-3 / 2000))));
  const note = document.getElementById("lz-note");
  if (out.error) { note.textContent = out.error; return; }

  const ctx = sizeCanvas(document.getElementById("lz-series"));
  const { width: W, height: H } = ctx.canvas;
  ctx.clearRect(0, 0, W, H);
  const all = out.series.flat();
  const lo = Math.min(...all), hi = Math.max(...all);
  const pad = 0.08 * (hi - lo || 1);
  const y = v => H - ((v - lo + pad) / (hi - lo + 2 * pad)) * H;
  const x = i => (i / (out.times.length - 1)) * W;
  out.series.forEach((s, si) => {
    ctx.beginPath();
    s.forEach((v, i) => i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v)));
    ctx.strokeStyle = SERIES_COLORS[si];
    ctx.lineWidth = 1.6;
    ctx.stroke();
  });
  ctx.font = `${12 * (window.devicePixelRatio || 1)}px system-ui`;
  out.names.forEach((n, i) => {
    ctx.fillStyle = SERIES_COLORS[i];
    ctx.fillText(n, 10 + 34 * i * (window.devicePixelRatio || 1), 16 * (window.devicePixelRatio || 1));
  });

  // phase portrait A-F with G as colour
  const pctx = sizeCanvas(document.getElementById("lz-phase"));
  const { width: PW, height: PH } = pctx.canvas;
  pctx.clearRect(0, 0, PW, PH);
  const [A, F, G] = out.series;
  const ax = [Math.min(...A), Math.max(...A)], fx = [Math.min(...F), Math.max(...F)];
  const gx = [Math.min(...G), Math.max(...G)];
  const px = v => ((v - ax[0]) / (ax[1] - ax[0] || 1)) * (PW - 20) + 10;
  const py = v => PH - (((v - fx[0]) / (fx[1] - fx[0] || 1)) * (PH - 20) + 10);
  for (let i = 1; i < A.length; i++) {
    const s = (G[i] - gx[0]) / (gx[1] - gx[0] || 1);
    pctx.strokeStyle = `hsl(${30 + 180 * s} 70% 60%)`;
    pctx.beginPath();
    pctx.moveTo(px(A[i - 1]), py(F[i - 1]));
    pctx.lineTo(px(A[i]), py(F[i]));
    pctx.stroke();
  }
  pctx.fillStyle = "#8494a7";
  pctx.font = `${11 * (window.devicePixelRatio || 1)}px system-ui`;
  pctx.fillText("phase portrait A–F (hue = G)", 10, 14 * (window.devicePixelRatio || 1));

  note.innerHTML =
    `E₀ = <b>${out.energy_initial.toPrecision(4)}</b>, ` +
    `Z₀ = <b>${out.enstrophy_initial.toPrecision(4)}</b>; relative drift over the run: ` +
    `E <b>${out.energy_max_rel_drift.toExponential(1)}</b>, ` +
    `Z <b>${out.enstrophy_max_rel_drift.toExponential(1)}</b>`;
}

// ---- panel 2: Rossby wave field -------------------------------------------

let playing = false;

function drawRossby() {
  if (!wasm) return;
  const t = val("rw-t");
  const n = 96;
  const out = JSON.parse(wasm.rossby_field_json(
    val("rw-a"), val("rw-k"), val("rw-l"), val("rw-b"), t, n, Math.PI));
  const note = document.getElementById("rw-note");
  if (out.error) { note.textContent = out.error; return; }

  const canvas = document.getElementById("rw-field");
  const ctx = sizeCanvas(canvas);
  const { width: W, height: H } = ctx.canvas;
  const img = ctx.createImageData(n, n);
  let amp = 1e-12;
  for (const v of out.values) amp = Math.max(amp, Math.abs(v));
  out.values.forEach((v, i) => {
    const s = v / amp; // -1 .. 1
    // blue-white-red diverging map
    const r = s > 0 ? 255 : Math.round(255 * (1 + s));
    const b = s < 0 ? 255 : Math.round(255 * (1 - s));
    const g = Math.round(255 * (1 - Math.abs(s) * 0.65));
    img.data.set([r, g, b, 255], 4 * i);
  });
  // scale the n x n image onto the canvas
  createImageBitmap(img).then(bm => {
    ctx.imageSmoothingEnabled = true;
    ctx.drawImage(bm, 0, 0, W, H);
  });
  note.innerHTML =
    `σ = <b>${out.sigma.toPrecision(4)}</b> (westward for β &gt; 0, k &gt; 0); ` +
    `verified residual max <b>${out.residual_max.toExponential(1)}</b>`;
}

function play() {
  if (!wasm) return;
  playing = !playing;
  document.getElementById("rw-play").textContent = playing ? "pause" : "play";
  const slider = document.getElementById("rw-t");
  const tick = () => {
    if (!playing) return;
    let t = parseFloat(slider.value) + 0.15;
    if (t > parseFloat(slider.max)) t = 0;
    slider.value = t;
    drawRossby();
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);
}

// ---- panel 3: symmetry reduction -------------------------------------------

function formatModel(out) {
  if (out.error) return out.error;
  const lines = [];
  lines.push(`subgroup elements: ${out.elements.join(", ")}`);
  lines.push(`fixed subspace dimension: ${out.dimension}`);
  if (out.constraints.length) {
    lines.push("constraints:");
    for (const c of out.constraints) lines.push(`  ${c}`);
  }
  lines.push("reduced model:");
  const terms = out.model.terms;
  for (const name of out.model.amplitudes) {
    const mine = terms.filter(t => t.target === name);
    const rhs = mine.length
      ? mine.map(t => `${t.coeff >= 0 ? "+" : "−"} ${Math.abs(t.coeff).toPrecision(6)}·${t.factors.join("·")}`).join(" ")
      : "0";
    lines.push(`  d${name}/dt = ${rhs}`);
  }
  return lines.join("\n");
}

function runReduce() {
  if (!wasm) return;
  const out = JSON.parse(wasm.reduce_model_json(
    document.getElementById("re-words").value, val("re-k"), val("re-l")));
  document.getElementById("re-out").textContent = formatModel(out);
}

function showTable() {
  if (!wasm) return;
  const rows = JSON.parse(wasm.subgroup_table_json(val("re-k"), val("re-l")));
  if (rows.error) {
    document.getElementById("re-out").textContent = rows.error;
    return;
  }
  const lines = rows.map((r, i) =>
    `${String(i + 1).padStart(3)}  order ${String(r.order).padStart(2)}  dim ${r.dimension}  <${r.generators}>`);
  document.getElementById("re-out").textContent = lines.join("\n");
}

document.getElementById("lz-run").addEventListener("click", runLorenz);
document.getElementById("rw-play").addEventListener("click", play);
document.getElementById("rw-t").addEventListener("input", drawRossby);
for (const id of ["rw-a", "rw-k", "rw-l", "rw-b"]) {
  document.getElementById(id).addEventListener("change", drawRossby);
}
document.getElementById("re-run").addEventListener("click", runReduce);
document.getElementById("re-table").addEventListener("click", showTable);

boot();
