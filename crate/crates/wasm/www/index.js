import init, { ia_demo, contract_demo, general_demo } from "./pkg/menuforge_wasm.js";

function summary(result) {
  if (result.status !== "optimal") return `${result.status}: ${result.reason}`;
  const r = result.report;
  const menu = r.menu.map((c) => `[${c.payments.map((x) => x.toFixed(4)).join(", ")}]`).join("\n");
  return `expected payment ${r.objective.toFixed(6)}\nverdict ${r.certificate.verdict}\nmenu\n${menu}\nbinding\n${r.binding.join("\n")}`;
}

function panel(id, solve) {
  const root = document.getElementById(id);
  const inputs = [...root.querySelectorAll("input, select")];
  const value = (name) => Number(root.querySelector(`[name=${name}]`).value);
  const update = () => {
    for (const input of inputs) {
      const out = input.parentElement.querySelector("output");
      if (out) out.textContent = Number(input.value).toFixed(2);
    }
    const result = JSON.parse(solve(value));
    root.querySelector(".plot").innerHTML = result.svg ?? "";
    root.querySelector("pre").textContent = summary(result);
  };
  inputs.forEach((input) => input.addEventListener("input", update));
  update();
}

await init();

panel("ia", (v) => ia_demo(v("left"), v("right"), v("q"), v("kappa")));
panel("contract", (v) =>
  contract_demo(
    new Float64Array([v("h0"), v("h1"), v("h2")]),
    new Float64Array([v("c0"), v("c1"), v("c2")]),
    v("target"),
  ),
);
panel("general", (v) => general_demo(v("ca"), v("cb"), v("kappa")));
