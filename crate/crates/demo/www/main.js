import init, { classifyRegime, sectionStiffness, rodEndDisplacement } from "./pkg/patchbeam_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, f) {
  try {
    $(id).textContent = f();
  } catch (e) {
    $(id).textContent = "error: " + (e.message ?? e);
  }
}

function stiffnessTable() {
  const d = sectionStiffness($("shape").value, num("a"), num("b"), num("young"), num("poisson"), num("h"));
  const names = ["ext", "bend2", "bend3", "twist"];
  let s = "        " + names.map((n) => n.padStart(12)).join("") + "\n";
  for (let i = 0; i < 4; i++) {
    s += names[i].padEnd(8);
    for (let j = 0; j < 4; j++) s += d[4 * i + j].toExponential(4).padStart(12);
    s += "\n";
  }
  return s;
}

function sweep() {
  const k = num("khat");
  const n = num("elements");
  const rows = [];
  for (let e = -3; e <= 3; e += 0.25) {
    const rho = 10 ** e;
    const [fe, closed] = rodEndDisplacement(rho, k, n);
    rows.push([rho, fe, closed]);
  }
  draw(rows);
  return "rho          zeta1(0)     closed form\n" +
    rows.filter((_, i) => i % 4 === 0)
      .map(([r, a, b]) => `${r.toExponential(2).padEnd(13)}${a.toFixed(6).padEnd(13)}${b.toFixed(6)}`)
      .join("\n");
}

function draw(rows) {
  const c = $("plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const x = (rho) => 40 + ((Math.log10(rho) + 3) / 6) * (c.width - 60);
  const y = (v) => c.height - 30 - (v / 0.55) * (c.height - 50);
  g.strokeStyle = "#888";
  g.beginPath();
  g.moveTo(40, y(0));
  g.lineTo(c.width - 20, y(0));
  g.moveTo(40, y(0));
  g.lineTo(40, y(0.55));
  g.stroke();
  g.fillStyle = "#444";
  g.fillText("1e-3", x(1e-3) - 10, c.height - 12);
  g.fillText("1", x(1) - 3, c.height - 12);
  g.fillText("1e3", x(1e3) - 10, c.height - 12);
  g.fillText("0.5", 10, y(0.5) + 3);
  g.strokeStyle = "#1b6ac9";
  g.beginPath();
  rows.forEach(([r, , b], i) => (i ? g.lineTo(x(r), y(b)) : g.moveTo(x(r), y(b))));
  g.stroke();
  g.fillStyle = "#d1452b";
  for (const [r, a] of rows) g.fillRect(x(r) - 2, y(a) - 2, 4, 4);
}

await init();
$("classify").onclick = () => show("regime", () => classifyRegime(num("kappa"), $("p").value));
$("stiff").onclick = () => show("stiffness", stiffnessTable);
$("sweep").onclick = () => show("rod", sweep);
$("classify").click();
