import init, {
  reference_parameters,
  parameter_labels,
  transition_curves,
  decomposition,
  incidence_table,
} from "./pkg/msm_wasm.js";

const POINTS = 161;
const $ = (id) => document.getElementById(id);
let mode = "curves";

function buildParameterInputs() {
  const labels = parameter_labels();
  const values = reference_parameters();
  $("params").innerHTML = "";
  labels.forEach((label, i) => {
    const row = document.createElement("label");
    row.textContent = label;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "any";
    input.value = values[i];
    input.addEventListener("change", render);
    row.appendChild(input);
    $("params").appendChild(row);
  });
}

function parameters() {
  return Float64Array.from($("params").querySelectorAll("input"), (el) => Number(el.value));
}

function profile() {
  return { woman: $("sex").value === "w", age: Number($("age").value) };
}

function split(flat, parts) {
  const n = flat.length / parts;
  return Array.from({ length: parts }, (_, j) => flat.slice(j * n, (j + 1) * n));
}

function drawAxes(ctx, box, tMax, yMax) {
  const { left, top, width, height } = box;
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.strokeRect(left, top, width, height);
  for (let k = 0; k <= 5; k++) {
    const y = top + height - (k / 5) * height;
    ctx.fillText((k * yMax / 5).toFixed(2), left - 36, y + 4);
    ctx.beginPath();
    ctx.moveTo(left, y);
    ctx.lineTo(left + 4, y);
    ctx.stroke();
  }
  const step = tMax <= 5 ? 0.5 : 1;
  for (let t = 0; t <= tMax + 1e-9; t += step) {
    const x = left + (t / tMax) * width;
    ctx.fillText(String(t), x - 6, top + height + 16);
  }
  ctx.fillText("years since discharge", left + width / 2 - 60, top + height + 34);
}

function plot(t, series, { stacked = false, yMax = 1 } = {}) {
  const canvas = $("plot");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const box = { left: 50, top: 10, width: canvas.width - 70, height: canvas.height - 60 };
  const tMax = t[t.length - 1];
  const x = (v) => box.left + (v / tMax) * box.width;
  const y = (v) => box.top + box.height - (v / yMax) * box.height;
  drawAxes(ctx, box, tMax, yMax);
  for (const s of series) {
    ctx.beginPath();
    if (stacked && s.fillFrom) {
      s.values.forEach((v, i) => (i ? ctx.lineTo(x(t[i]), y(v)) : ctx.moveTo(x(t[i]), y(v))));
      for (let i = t.length - 1; i >= 0; i--) ctx.lineTo(x(t[i]), y(s.fillFrom[i]));
      ctx.closePath();
      ctx.fillStyle = s.color;
      ctx.fill();
    } else {
      s.values.forEach((v, i) => (i ? ctx.lineTo(x(t[i]), y(v)) : ctx.moveTo(x(t[i]), y(v))));
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 2;
      ctx.stroke();
      ctx.lineWidth = 1;
    }
  }
  $("legend").innerHTML = series
    .map((s) => `<span><i style="background:${s.color}"></i>${s.label}</span>`)
    .join("");
}

function renderCurves() {
  const { woman, age } = profile();
  const flat = transition_curves(parameters(), woman, age, Number($("tmax").value), POINTS);
  const [t, cifFr, cifFd, p11, p12, p13] = split(flat, 6);
  plot(t, [
    { label: "still in initial state (p11)", values: p11, color: "#4c72b0" },
    { label: "alive after refracture (p12)", values: p12, color: "#dd8452" },
    { label: "dead (p13)", values: p13, color: "#55a868" },
    { label: "CIF refracture", values: cifFr, color: "#c44e52" },
    { label: "CIF death without refracture", values: cifFd, color: "#8172b3" },
  ]);
}

function renderDecomposition() {
  const { woman, age } = profile();
  const flat = decomposition(parameters(), woman, age, Number($("tmax").value), POINTS);
  const [t, cif, occupancy] = split(flat, 4);
  const zero = new Float64Array(t.length);
  const yMax = Math.max(0.05, Math.ceil(cif[cif.length - 1] * 20) / 20);
  plot(
    t,
    [
      { label: "refractured, since died", values: cif, fillFrom: occupancy, color: "#f2b880" },
      { label: "refractured, alive", values: occupancy, fillFrom: zero, color: "#c0504d" },
      { label: "CIF refracture", values: cif, color: "#333" },
    ],
    { stacked: true, yMax },
  );
}

function renderTable() {
  const cells = incidence_table(parameters(), Number($("horizon").value));
  const columns = ["W 70", "W 80", "W 90", "M 70", "M 80", "M 90"];
  const rows = ["fracture to refracture", "fracture to death", "refracture to death"];
  let html = `<tr><th>transition</th>${columns.map((c) => `<th>${c}</th>`).join("")}</tr>`;
  rows.forEach((name, r) => {
    const values = columns.map((_, c) => `<td>${cells[r * 6 + c].toFixed(2)}</td>`).join("");
    html += `<tr><td>${name}</td>${values}</tr>`;
  });
  $("incidence").innerHTML = html;
}

function render() {
  $("error").textContent = "";
  $("plot-area").hidden = mode === "table";
  $("table-area").hidden = mode !== "table";
  try {
    if (mode === "curves") renderCurves();
    else if (mode === "decomposition") renderDecomposition();
    else renderTable();
  } catch (e) {
    $("error").textContent = e.message ?? String(e);
  }
}

await init();
buildParameterInputs();
$("reset").addEventListener("click", () => { buildParameterInputs(); render(); });
$("age").addEventListener("input", () => { $("age-out").textContent = $("age").value; render(); });
for (const id of ["sex", "tmax", "horizon"]) $(id).addEventListener("change", render);
$("show-curves").addEventListener("click", () => { mode = "curves"; render(); });
$("show-decomposition").addEventListener("click", () => { mode = "decomposition"; render(); });
$("show-table").addEventListener("click", () => { mode = "table"; render(); });
render();
