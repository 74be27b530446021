"""Command-line entry points. Batch commands (simulate, eval, closure-bench)
run in-process; `serve` starts the annotation service and `annotate` is a thin
terminal client for it."""

from __future__ import annotations

import json
import sys

import click

from . import alloop, bench, metrics
from .alloop import LoopConfig, ConfigError, write_curve_csv
from .corpus import Corpus, read_jsonl
from .scorer import OracleNoiseScorer
from .synth import SynthConfig, generate_corpus


def _load_corpus(spec: dict) -> Corpus:
    kind = spec.get("kind", "synth")
    if kind == "synth":
        fields = {k: v for k, v in spec.items() if k != "kind"}
        try:
            cfg = SynthConfig(**fields)
        except TypeError as exc:
            raise ConfigError("corpus", str(exc))
        return generate_corpus(cfg)
    if kind == "jsonl":
        if "path" not in spec:
            raise ConfigError("corpus.path", "required for kind 'jsonl'")
        return read_jsonl(spec["path"])
    raise ConfigError("corpus.kind", f"unknown corpus kind {kind!r}")


@click.group()
def main():
    """Active-learning laboratory for coreference annotation."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("-o", "--output", "output_csv", default="curves.csv",
              help="Learning-curve CSV output path.")
@click.option("--reports-json", default=None, help="Optional per-round report dump.")
def simulate(config_path, output_csv, reports_json):
    """Run simulated active-learning experiments from a JSON config."""
    with open(config_path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        corpus = _load_corpus(raw.get("corpus", {}))
        base = LoopConfig.from_dict(raw.get("loop", {}))
        run_specs = raw.get("runs") or [{"run_id": "run"}]
        runs = []
        for spec in run_specs:
            run_id = spec.get("run_id", "run")
            overrides = {k: v for k, v in spec.items() if k != "run_id"}
            config = LoopConfig.from_dict({**base.to_dict(), **overrides})
            reports = alloop.run_active_learning(config, corpus)
            runs.append((run_id, config, reports))
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    write_curve_csv(output_csv, runs)
    if reports_json:
        payload = [{"run_id": rid, "config": cfg.to_dict(),
                    "reports": [r.__dict__ for r in reports]}
                   for rid, cfg, reports in runs]
        with open(reports_json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    for run_id, config, reports in runs:
        final = reports[-1]
        click.echo(f"{run_id}: {len(reports)} rounds, "
                   f"budget {final.budget_seconds:.1f}s, avg F1 {final.avg_f1:.4f}")
    click.echo(f"curves written to {output_csv}")


@main.command("eval")
@click.argument("gold_path", type=click.Path(exists=True))
@click.argument("pred_path", type=click.Path(exists=True))
@click.option("--csv", "csv_path", default=None, help="Also write the table as CSV.")
def eval_cmd(gold_path, pred_path, csv_path):
    """Score predicted clusterings (JSONL) against gold clusterings (JSONL)."""
    gold_corpus = read_jsonl(gold_path)
    pred_corpus = read_jsonl(pred_path)
    rows = []
    for doc in gold_corpus.documents:
        gold = gold_corpus.gold.get(doc.doc_id)
        pred = pred_corpus.gold.get(doc.doc_id)
        if gold is None or pred is None:
            click.echo(f"warning: {doc.doc_id} missing from one side, skipped", err=True)
            continue
        g, p = list(gold.clusters), list(pred.clusters)
        rows.append((doc.doc_id, metrics.muc(g, p), metrics.b_cubed(g, p),
                     metrics.ceaf_e(g, p), metrics.avg_f1(g, p)))
    if not rows:
        click.echo("error: no documents in common", err=True)
        sys.exit(1)
    header = f"{'doc_id':30s} {'muc':>8s} {'b3':>8s} {'ceafe':>8s} {'avg':>8s}"
    click.echo(header)
    for doc_id, m, b, c, a in rows:
        click.echo(f"{doc_id:30s} {m.f1:8.4f} {b.f1:8.4f} {c.f1:8.4f} {a:8.4f}")
    mean = lambda xs: sum(xs) / len(xs)
    click.echo(f"{'MEAN':30s} {mean([r[1].f1 for r in rows]):8.4f} "
               f"{mean([r[2].f1 for r in rows]):8.4f} "
               f"{mean([r[3].f1 for r in rows]):8.4f} "
               f"{mean([r[4] for r in rows]):8.4f}")
    if csv_path:
        import csv as _csv
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["doc_id", "muc_p", "muc_r", "muc_f1", "b3_p", "b3_r",
                             "b3_f1", "ceafe_p", "ceafe_r", "ceafe_f1", "avg_f1"])
            for doc_id, m, b, c, a in rows:
                writer.writerow([doc_id, m.precision, m.recall, m.f1, b.precision,
                                 b.recall, b.f1, c.precision, c.recall, c.f1, a])


@main.command("closure-bench")
@click.option("-n", "--insertions", default=1600, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--output", "csv_path", default="closure_bench.csv", show_default=True)
def closure_bench(insertions, seed, csv_path):
    """Benchmark incremental closure maintenance against from-scratch recomputation."""
    rows = bench.run_closure_bench(insertions, seed=seed)
    bench.write_bench_csv(rows, csv_path)
    click.echo(f"{'insertion':>10s} {'incremental_s':>14s} {'recompute_s':>12s} {'ratio':>10s}")
    for row in rows:
        click.echo(f"{row.insertion:>10d} {row.incremental_seconds:>14.6f} "
                   f"{row.recompute_seconds:>12.6f} {row.ratio:>10.1f}")
    click.echo(f"written to {csv_path}")


@main.command()
@click.option("--port", default=8765, show_default=True, envvar="COREFAL_PORT")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--corpus", "corpus_path", default=None,
              help="Corpus JSONL with gold clusters; default is a synthetic demo corpus.")
@click.option("--noise", default=0.2, show_default=True,
              help="Oracle scorer noise used for proposals.")
@click.option("--k", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--log", "log_path", default="answers.jsonl", show_default=True,
              help="Append-only answer log.")
def serve(port, host, corpus_path, noise, k, seed, log_path):
    """Run the live annotation service."""
    import uvicorn

    from .service import create_app

    if corpus_path:
        corpus = read_jsonl(corpus_path)
    else:
        corpus = generate_corpus(SynthConfig(n_docs=5, seed=seed))
    scorer = OracleNoiseScorer(corpus.gold, noise, seed=seed)
    app = create_app(corpus, scorer, k=k, seed=seed, log_path=log_path)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--url", default="http://127.0.0.1:8765", show_default=True)
@click.option("--protocol", type=click.Choice(["discrete", "pairwise"]), default="discrete")
@click.option("--max-questions", default=None, type=int)
def annotate(url, protocol, max_questions):
    """Thin terminal client for the annotation service."""
    import httpx

    with httpx.Client(base_url=url, timeout=30) as client:
        session_id = client.post("/sessions", json={"protocol": protocol}).json()["session_id"]
        asked = 0
        while max_questions is None or asked < max_questions:
            q = client.get(f"/sessions/{session_id}/next").json()
            if q["done"]:
                click.echo("no more queries")
                break
            tokens = q["tokens"]
            ts, te = q["target"]
            ps, pe = q["proposed"]
            rendered = []
            for i, tok in enumerate(tokens):
                if ts <= i <= te:
                    rendered.append(click.style(tok, bg="yellow", fg="black"))
                elif ps <= i <= pe:
                    rendered.append(click.style(tok, bg="blue", fg="white"))
                else:
                    rendered.append(tok)
            click.echo(" ".join(rendered))
            coref = click.confirm("Are the two mentions coreferent?")
            payload = {"query_id": q["query_id"], "doc_id": q["doc_id"],
                       "target": q["target"], "proposed": q["proposed"],
                       "verdict": "coreferent" if coref else "not_coreferent"}
            if not coref and protocol == "discrete":
                raw = click.prompt(
                    "First appearance: 'start end' token indices, 'none' (no antecedent) "
                    "or 'invalid' (not a mention)")
                if raw.strip() == "none":
                    payload["followup"] = {"type": "abstain_no_antecedent"}
                elif raw.strip() == "invalid":
                    payload["followup"] = {"type": "abstain_invalid_mention"}
                else:
                    start, end = (int(x) for x in raw.split())
                    payload["followup"] = {"type": "first_antecedent", "span": [start, end]}
            ack = client.post(f"/sessions/{session_id}/answer", json=payload)
            if ack.status_code != 200:
                click.echo(f"rejected: {ack.text}", err=True)
                continue
            body = ack.json()
            if not body["accepted"]:
                click.echo(f"conflict: {body['conflicts']}", err=True)
            asked += 1
        progress = client.get(f"/sessions/{session_id}/progress").json()
        click.echo(json.dumps(progress["ledger"], indent=2))


if __name__ == "__main__":
    main()
