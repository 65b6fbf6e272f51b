import init, { finalizationTimeline, latencySummary, bleuScore } from "./pkg/lagmeter_demo.js";

const $ = (id) => document.getElementById(id);

const SAMPLE_LOG = [
  { t: 1.0, text: "kočka" },
  { t: 1.7, text: "kočka stála" },
  { t: 2.4, text: "kočka seděla na" },
  { t: 3.0, text: "kočka seděla na rohožce" },
  { t: 3.8, text: "kočka seděla na rohožce ." },
].map((e) => JSON.stringify(e)).join("\n");

const row = (doc, track, words, t0, step) =>
  words.map((w, i) => {
    const s = t0 + i * step;
    return [doc, track, i, w, s.toFixed(2), (s + 0.3).toFixed(2)].join("\t");
  }).join("\n");

const SAMPLE_SRC = row("d1", "src", "the cat sat on the mat .".split(" "), 0, 0.5);
const SAMPLE_TGT = row("d1", "int", "kočka seděla na rohožce .".split(" "), 1.8, 0.6);

function showError(id, err) {
  $(id).textContent = err ? String(err.message ?? err) : "";
}

function fill(table, head, rows) {
  table.innerHTML = "";
  const tr = table.insertRow();
  for (const h of head) {
    const th = document.createElement("th");
    th.textContent = h;
    tr.appendChild(th);
  }
  for (const r of rows) {
    const tr = table.insertRow();
    for (const c of r) {
      const td = tr.insertCell();
      if (c instanceof Node) td.appendChild(c); else td.textContent = c;
    }
  }
}

function canvasContext(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
  return ctx;
}

function drawTimeline(data) {
  const canvas = $("log-canvas");
  const ctx = canvasContext(canvas);
  const pad = 40;
  const end = Math.max(data.session_end, ...data.events.map((e) => e.t)) || 1;
  const x = (t) => pad + (t / end) * (canvas.width - 2 * pad);
  const axis = canvas.height - 30;

  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, axis);
  ctx.lineTo(canvas.width - pad, axis);
  ctx.stroke();
  ctx.fillStyle = "#555";
  for (let t = 0; t <= end + 1e-9; t += Math.max(0.5, Math.ceil(end / 10))) {
    ctx.fillText(t.toFixed(1) + " s", x(t) - 10, axis + 18);
  }

  ctx.strokeStyle = "#bbb";
  for (const e of data.events) {
    ctx.beginPath();
    ctx.moveTo(x(e.t), axis);
    ctx.lineTo(x(e.t), 10);
    ctx.stroke();
  }

  ctx.fillStyle = "#1a7f37";
  data.words.forEach((w, i) => {
    const y = axis - 14 - (i % 8) * 20;
    ctx.beginPath();
    ctx.arc(x(w.time), y, 4, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillText(w.word, x(w.time) + 7, y + 4);
  });
}

function runLog() {
  showError("log-error");
  try {
    const data = JSON.parse(finalizationTimeline($("log").value));
    drawTimeline(data);
    fill($("log-events"), ["t", "output"], data.events.map((e) => {
      const span = document.createElement("span");
      e.tokens.forEach((tok, i) => {
        const s = document.createElement("span");
        s.className = i < e.shared ? "stable" : "unstable";
        s.textContent = tok + " ";
        span.appendChild(s);
      });
      return [e.t.toFixed(2), span];
    }));
  } catch (err) {
    showError("log-error", err);
  }
}

function drawHistogram(samples) {
  const canvas = $("lat-canvas");
  const ctx = canvasContext(canvas);
  if (samples.length === 0) return;
  const pad = 40;
  const lo = Math.min(0, ...samples);
  const hi = Math.max(...samples) + 1e-9;
  const bins = Math.min(20, Math.max(5, Math.ceil(Math.sqrt(samples.length))));
  const counts = new Array(bins).fill(0);
  for (const s of samples) counts[Math.min(bins - 1, Math.floor(((s - lo) / (hi - lo)) * bins))]++;
  const top = Math.max(...counts);
  const w = (canvas.width - 2 * pad) / bins;
  const h = canvas.height - 50;
  ctx.fillStyle = "#4078c0";
  counts.forEach((c, i) => {
    const bh = (c / top) * h;
    ctx.fillRect(pad + i * w + 1, 10 + h - bh, w - 2, bh);
  });
  ctx.fillStyle = "#555";
  for (let i = 0; i <= bins; i += Math.ceil(bins / 5)) {
    ctx.fillText((lo + ((hi - lo) * i) / bins).toFixed(1) + " s", pad + i * w - 10, canvas.height - 20);
  }
}

function runLatency() {
  showError("lat-error");
  try {
    const out = JSON.parse(latencySummary($("src").value, $("tgt").value, $("links").value));
    const r = out.report;
    const pct = r.percentiles.map((p) => ["≤ " + p.pct + "%", p.value.toFixed(2)]);
    fill($("lat-table"), ["", "seconds"], [
      ["avg ± std", `${r.avg.toFixed(2)} ± ${r.std.toFixed(2)}`],
      ...pct,
      ["samples", String(r.count)],
      ["source words aligned", r.aligned_fraction == null ? "-" : (100 * r.aligned_fraction).toFixed(1) + "%"],
      ["links", out.links],
    ]);
    drawHistogram(out.samples);
  } catch (err) {
    showError("lat-error", err);
  }
}

function runBleu() {
  showError("bleu-error");
  try {
    const out = JSON.parse(bleuScore($("hyp").value, $("ref").value, $("smooth").checked));
    const line = (name, r) => [
      name,
      r.score.toFixed(2),
      r.precisions.map((p) => (100 * p).toFixed(1)).join(" / "),
      r.brevity_penalty.toFixed(3),
      `${r.hyp_len} / ${r.ref_len}`,
    ];
    fill($("bleu-table"), ["mode", "BLEU", "n-gram precision", "BP", "hyp / ref length"], [
      line("whole text", out.agg),
      line("per line", out.one),
    ]);
  } catch (err) {
    showError("bleu-error", err);
  }
}

await init();
$("log").value = SAMPLE_LOG;
$("src").value = SAMPLE_SRC;
$("tgt").value = SAMPLE_TGT;
$("hyp").value = "the cat sat\na dog ran on the mat";
$("ref").value = "the cat sat down\na dog ran on the mat";
$("run-log").onclick = runLog;
$("run-lat").onclick = runLatency;
$("run-bleu").onclick = runBleu;
runLog();
runLatency();
runBleu();
