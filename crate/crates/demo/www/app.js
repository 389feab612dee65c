import init, { describe, plan, infer } from "./pkg/clmdp_demo.js";

const CELL = 36;
const CONTEXT_COLOURS = ["#dbe9f6", "#fde3b3", "#d5efd0"];
const FEATURE_COLOURS = {
  "coral": "#e67e22", "eddy": "#2980b9",
  "autonomy-road": "#7f8c8d", "pothole": "#6d4c41",
  "slippery": "#00acc1", "narrow-corridor": "#8e24aa",
};
const ARROWS = { N: [0, -1], S: [0, 1], E: [1, 0], W: [-1, 0] };

const $ = (id) => document.getElementById(id);
let view = null;

function status(text, error = false) {
  const el = $("status");
  el.textContent = text;
  el.className = error ? "error" : "";
}

function guard(fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      status(String(e.message ?? e), true);
    }
  };
}

function legend() {
  const parts = view.contexts.map((name, c) =>
    `<span><i style="background:${CONTEXT_COLOURS[c]}"></i>${name}</span>`);
  for (const [kind] of view.features) {
    parts.push(`<span><i style="border:3px solid ${FEATURE_COLOURS[kind]};box-sizing:border-box"></i>${kind}</span>`);
  }
  parts.push('<span><i style="background:#e53935"></i>cannot reach goal</span>');
  $("legend").innerHTML = parts.join("");
}

function layers() {
  return [...new Set(view.states.map((s) => s.carrying))];
}

function draw(result = null, mapping = null, visited = null) {
  const grids = $("grids");
  grids.innerHTML = "";
  const conflicts = new Set(result?.conflict_states ?? []);
  const z = mapping ?? view.states.map((s) => s.context);
  for (const carrying of layers()) {
    const box = document.createElement("div");
    box.className = "layer";
    box.innerHTML = `<h3>${carrying ? "carrying payload" : "without payload"}</h3>`;
    const canvas = document.createElement("canvas");
    canvas.width = view.width * CELL;
    canvas.height = view.height * CELL;
    box.appendChild(canvas);
    grids.appendChild(box);
    const g = canvas.getContext("2d");
    g.fillStyle = "#333";
    g.fillRect(0, 0, canvas.width, canvas.height);

    view.states.forEach((s, i) => {
      if (s.carrying !== carrying) return;
      const [x, y] = [s.x * CELL, s.y * CELL];
      g.fillStyle = conflicts.has(i) ? "#e53935" : CONTEXT_COLOURS[z[i]];
      g.fillRect(x + 1, y + 1, CELL - 2, CELL - 2);
      if (visited && !visited[i]) {
        g.fillStyle = "rgba(255,255,255,.6)";
        g.fillRect(x + 1, y + 1, CELL - 2, CELL - 2);
      }
      if (mapping && mapping[i] !== s.context) {
        g.strokeStyle = "#000";
        g.setLineDash([3, 3]);
        g.strokeRect(x + 4, y + 4, CELL - 8, CELL - 8);
        g.setLineDash([]);
      }
    });
    for (const [kind, cells] of view.features) {
      g.strokeStyle = FEATURE_COLOURS[kind];
      g.lineWidth = 3;
      for (const [x, y] of cells) g.strokeRect(x * CELL + 3, y * CELL + 3, CELL - 6, CELL - 6);
      g.lineWidth = 1;
    }
    g.font = "bold 16px system-ui";
    g.textAlign = "center";
    g.textBaseline = "middle";
    g.fillStyle = "#000";
    g.fillText("G", view.goal[0] * CELL + CELL / 2, view.goal[1] * CELL + CELL / 2);
    if (view.pickup) g.fillText("P", view.pickup[0] * CELL + CELL / 2, view.pickup[1] * CELL + CELL / 2);

    if (result) {
      view.states.forEach((s, i) => {
        if (s.carrying !== carrying) return;
        if (s.x === view.goal[0] && s.y === view.goal[1] && carrying) return;
        const name = view.actions[result.actions[i]];
        const cx = s.x * CELL + CELL / 2, cy = s.y * CELL + CELL / 2;
        g.strokeStyle = g.fillStyle = "#111";
        if (ARROWS[name]) {
          const [dx, dy] = ARROWS[name];
          g.beginPath();
          g.moveTo(cx - dx * 9, cy - dy * 9);
          g.lineTo(cx + dx * 10, cy + dy * 10);
          g.stroke();
          g.beginPath();
          g.arc(cx + dx * 10, cy + dy * 10, 3, 0, 2 * Math.PI);
          g.fill();
        } else {
          g.beginPath();
          g.arc(cx, cy, 5, 0, 2 * Math.PI);
          g.stroke();
        }
      });
    }
  }
}

function summary(result) {
  const lines = [`${result.technique}: ${result.conflict_states.length} states cannot reach the goal`];
  if (result.resolved !== null) {
    const names = (result.contexts_updated ?? []).map((c) => view.contexts[c]);
    lines.push(`resolver: ${result.resolved ? "resolved" : "unresolved"} after ${result.resolver_iterations} pass(es)` +
      (names.length ? `, re-planned ${names.join(", ")}` : ""));
  }
  return lines.join("\n");
}

function generate() {
  view = JSON.parse(describe($("domain").value, Number($("seed").value)));
  legend();
  draw();
  const order = view.meta_ordering.map((c) => view.contexts[c]).join(" ≻ ");
  status(`${view.domain} seed ${view.seed}: ${view.states.length} states\ncontext priority: ${order}`);
}

function runPlan() {
  if (!view) generate();
  const result = JSON.parse(plan(view.domain, view.seed, $("technique").value));
  draw(result);
  status(summary(result));
}

function runInfer() {
  if (!view) generate();
  const r = JSON.parse(infer(view.domain, view.seed,
    Number($("trajectories").value), Number($("expert-seed").value)));
  draw(r.plan, r.inferred, r.visited);
  const seen = r.visited.filter(Boolean).length;
  status(`${r.trajectories} expert trajectories visited ${seen}/${r.visited.length} states (unvisited are faded)\n` +
    `mapping accuracy ${(100 * r.accuracy).toFixed(1)}% ` +
    `(highest-priority context everywhere: ${(100 * r.constant_accuracy).toFixed(1)}%; dashed = wrong)\n` +
    summary(r.plan));
}

await init();
$("generate").onclick = guard(generate);
$("plan").onclick = guard(runPlan);
$("infer").onclick = guard(runInfer);
guard(generate)();
