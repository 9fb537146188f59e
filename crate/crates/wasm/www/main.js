import init, { compareCosts, scoreSentence, parseCompletion, version } from "./pkg/annolingo_wasm.js";

const $ = (id) => document.getElementById(id);

function show(out, fn) {
  out.classList.remove("err");
  try {
    out.textContent = fn();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function runCost() {
  show($("cost-out"), () => {
    const req = {
      items: Number($("cost-items").value),
      model: { golds_per_item_human: Number($("cost-golds").value) },
    };
    const budget = $("cost-budget").value.trim();
    if (budget) req.budget = budget;
    const res = JSON.parse(compareCosts(JSON.stringify(req)));
    let text = res.table;
    if (res.budget) {
      const fmt = (n) => (n === null ? "unbounded" : n.toLocaleString("en-US"));
      text += `\ncoverage under ${res.budget.amount}: human-only ${fmt(res.budget.human_only)}, assisted ${fmt(res.budget.assisted)}`;
    }
    return text;
  });
}

function runScore() {
  show($("score-out"), () => {
    const req = {
      candidate: $("score-cand").value,
      references: $("score-refs").value.split("\n"),
      smoothing: $("score-smooth").checked ? "add_one" : "none",
    };
    const r = JSON.parse(scoreSentence(JSON.stringify(req)));
    return [
      `BLEU         ${r.bleu.toFixed(2)}   (n-gram matches ${r.ngram_matches.join("/")} of ${r.ngram_totals.join("/")})`,
      `ROUGE-L      ${r.rouge_l.score.toFixed(4)}`,
      `METEOR-lite  ${r.meteor_lite.toFixed(4)}`,
      "",
      `candidate tokens: ${r.tokens.candidate.join(" | ")}`,
      ...r.tokens.references.map(
        (t, i) => `reference ${i + 1}: ${t.join(" | ")}   [${r.alignments[i].matches} matches, ${r.alignments[i].chunks} chunks]`,
      ),
    ].join("\n");
  });
}

function runParse() {
  show($("parse-out"), () => {
    const req = {
      task: $("parse-task").value,
      text: $("parse-text").value,
      n_paraphrases: Number($("parse-n").value),
    };
    return JSON.stringify(JSON.parse(parseCompletion(JSON.stringify(req))), null, 2);
  });
}

await init();
$("version").textContent = version();
$("cost-run").addEventListener("click", runCost);
$("score-run").addEventListener("click", runScore);
$("parse-run").addEventListener("click", runParse);
runCost();
runScore();
runParse();
