import init, {
  Scene, figure_bones, heatmap_rgba, heatmap_argmax, simdr_vectors, simdr_argmax, storage_ratio,
} from './pkg/evrep_wasm_demo.js';

const SENSOR = [160, 120];
const $ = (id) => document.getElementById(id);
let scene = null;
let joint = [20, 40];

function showError(e) {
  $('error').textContent = e ? String(e) : '';
}

// draws an RGBA buffer of w x h onto a canvas, scaled to fill it
function blit(canvas, rgba, w, h) {
  const off = new OffscreenCanvas(w, h);
  off.getContext('2d').putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
  const ctx = canvas.getContext('2d');
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function timeColour(tau, alpha = 1) {
  return `hsla(${Math.round(240 - 240 * tau)}, 90%, 55%, ${alpha})`;
}

function drawEvents() {
  const c = $('events');
  const ctx = c.getContext('2d');
  const sx = c.width / scene.width();
  const sy = c.height / scene.height();
  ctx.fillStyle = '#000';
  ctx.fillRect(0, 0, c.width, c.height);
  const ev = scene.events();
  for (let i = 0; i < ev.length; i += 4) {
    ctx.fillStyle = timeColour(ev[i + 2], 0.5);
    ctx.fillRect(ev[i] * sx, ev[i + 1] * sy, sx, sy);
  }
  const label = scene.label_at(Number($('tau').value));
  const bones = figure_bones();
  ctx.strokeStyle = '#fff';
  ctx.lineWidth = 2;
  for (let b = 0; b < bones.length; b += 2) {
    const [a, z] = [bones[b], bones[b + 1]];
    ctx.beginPath();
    ctx.moveTo((label[2 * a] + 0.5) * sx, (label[2 * a + 1] + 0.5) * sy);
    ctx.lineTo((label[2 * z] + 0.5) * sx, (label[2 * z + 1] + 0.5) * sy);
    ctx.stroke();
  }
}

function drawCloud() {
  const k = Number($('k').value);
  $('k-val').textContent = k;
  const n = Math.max(0, Number($('sample-n').value) | 0);
  const rows = scene.raster_points(k, n, 0);
  const c = $('cloud');
  const ctx = c.getContext('2d');
  ctx.fillStyle = '#000';
  ctx.fillRect(0, 0, c.width, c.height);
  ctx.strokeStyle = '#333';
  for (let s = 1; s < k; s++) {
    const y = (s / k) * c.height;
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(c.width, y);
    ctx.stroke();
  }
  let events = 0;
  for (let i = 0; i < rows.length; i += 5) {
    const [x, t, p, cnt] = [rows[i], rows[i + 2], rows[i + 3], rows[i + 4]];
    events += cnt;
    ctx.fillStyle = p >= 0 ? 'rgba(255,90,70,0.7)' : 'rgba(80,140,255,0.7)';
    const r = Math.min(4, 0.8 + Math.sqrt(cnt) * 0.6);
    ctx.beginPath();
    ctx.arc((x / scene.width()) * c.width, t * c.height, r, 0, 2 * Math.PI);
    ctx.fill();
  }
  $('cloud-stat').textContent =
    `${scene.event_count()} events -> ${rows.length / 5} points` +
    (n === 0 ? ` (all cells, e_cnt sum ${events})` : ` (sampled with seed 0)`);
}

function drawPlanes() {
  const bins = Number($('bins').value);
  $('bins-val').textContent = bins;
  for (const p of ['hw', 'th', 'wt']) {
    blit($(`plane-${p}`), scene.dev_plane_rgba(bins, p), bins, bins);
  }
  blit($('dea'), scene.dea_rgba(bins, $('pooling').value), 3 * bins, bins);
  const ratio = storage_ratio(bins);
  $('dev-stat').textContent =
    `${bins}^3 grid: tri-planes keep 3 x ${bins}^2 cells, ${(ratio * 100).toFixed(2)}% of the full grid. ` +
    'Red = positive events, blue = negative.';
}

function drawCodecs() {
  const sigmaH = Number($('hm-sigma').value);
  const sigmaS = Number($('sd-sigma').value);
  const [x, y] = joint;
  blit($('heatmap'), heatmap_rgba(x, y, 64, sigmaH), 64, 64);
  const argmax = heatmap_argmax(x, y, 64, sigmaH);

  // the same joint on the 346 x 260 sensor axis
  const su = (x / 64) * 346;
  const sv = (y / 64) * 260;
  const vec = simdr_vectors(su, sv, 346, 260, sigmaS);
  const decoded = simdr_argmax(vec, 346);
  const c = $('simdr');
  const ctx = c.getContext('2d');
  ctx.fillStyle = '#000';
  ctx.fillRect(0, 0, c.width, c.height);
  const plot = (from, len, top) => {
    ctx.strokeStyle = '#6cf';
    ctx.beginPath();
    for (let i = 0; i < len; i++) {
      const px = (i / (len - 1)) * (c.width - 10) + 5;
      const py = top + 110 - vec[from + i] * 100;
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    }
    ctx.stroke();
  };
  plot(0, 346, 5);
  plot(346, 260, 133);
  $('codec-stat').textContent =
    `heatmap joint (${x.toFixed(1)}, ${y.toFixed(1)}) -> argmax (${argmax[0]}, ${argmax[1]}); ` +
    `SimDR joint (${su.toFixed(1)}, ${sv.toFixed(1)}) -> argmax (${decoded[0]}, ${decoded[1]})`;
}

function rebuild() {
  try {
    scene = new Scene(SENSOR[0], SENSOR[1], Number($('seed').value) >>> 0, Number($('threshold').value));
    showError(null);
    drawEvents();
    drawCloud();
    drawPlanes();
  } catch (e) {
    showError(e);
  }
}

function guarded(f) {
  return () => {
    try {
      f();
      showError(null);
    } catch (e) {
      showError(e);
    }
  };
}

await init();
$('seed').addEventListener('change', rebuild);
$('threshold').addEventListener('change', rebuild);
$('k').addEventListener('input', guarded(drawCloud));
$('sample-n').addEventListener('change', guarded(drawCloud));
$('tau').addEventListener('input', guarded(drawEvents));
$('bins').addEventListener('input', guarded(drawPlanes));
$('pooling').addEventListener('change', guarded(drawPlanes));
$('hm-sigma').addEventListener('change', guarded(drawCodecs));
$('sd-sigma').addEventListener('change', guarded(drawCodecs));
$('heatmap').addEventListener('click', (ev) => {
  const r = ev.target.getBoundingClientRect();
  const clamp = (v) => Math.min(63.99, Math.max(0, v));
  joint = [clamp(((ev.clientX - r.left) / r.width) * 64), clamp(((ev.clientY - r.top) / r.height) * 64)];
  guarded(drawCodecs)();
});
rebuild();
drawCodecs();
