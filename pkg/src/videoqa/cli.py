"""Command-line entry point: generate, train, eval, ask and report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evalharness as eh
from .errors import ContractError, GenerationError, LoadError, VideoQAError
from .questlang import generate_questions, read_corpus, write_corpus
from .rng import SplitMix64
from .scenesim import SceneConfig, export_dataset, import_dataset, load_clip, load_truth, make_clip, read_manifest

QA_FILE = "qa.jsonl"
DEFAULT_QUESTIONS = {"Count": 2, "Color": 2, "Shape": 1, "Location": 5}


def _clip_seed(seed: int, i: int) -> int:
    return SplitMix64(seed).child(f"clip{i}").next_u64() >> 33


def build_dataset(seed: int, count: int, config: SceneConfig | None = None,
                  questions: dict[str, int] | None = None):
    """``count`` clips with questions; clips whose questions cannot be filled are replaced."""
    questions = DEFAULT_QUESTIONS if questions is None else questions
    clips, items = [], []
    i = 0
    while len(clips) < count:
        if i >= 10 * count + 100:
            raise GenerationError(f"could not build {count} clips with questions")
        s = _clip_seed(seed, i)
        i += 1
        clip, truth = make_clip(s, config)
        name = f"clip_{len(clips):04d}.clip"
        try:
            qa = generate_questions(truth.graph, s, questions, clip=name)
        except GenerationError:
            continue
        clips.append((clip, truth))
        items.extend(qa)
    return clips, items


def _graphs(data: Path, model_path: str | None):
    from .videonet import load_model, predict_clip, predicted_graph

    manifest = read_manifest(data)
    dataset = import_dataset(data)
    model = load_model(model_path) if model_path else None
    graphs = {}
    for m, (clip, truth) in zip(manifest, dataset):
        graphs[m["clip"]] = truth.graph if model is None else predicted_graph(truth, predict_clip(model, clip, truth))
    return graphs


def cmd_generate(args) -> int:
    cfg = SceneConfig(n_objects=args.objects, F=args.frames, H=args.size, W=args.size, n_events=args.events)
    cfg.validate()
    clips, items = build_dataset(args.seed, args.count, cfg)
    export_dataset(clips, args.out)
    write_corpus(items, Path(args.out) / QA_FILE)
    print(f"wrote {len(clips)} clips and {len(items)} questions to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .plotting import loss_curve
    from .videonet import Model, NetworkConfig, save_model, train

    config = NetworkConfig()
    if args.config:
        try:
            config = NetworkConfig.from_json(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise LoadError(f"cannot read network config {args.config}: {exc}") from exc
        except (TypeError, KeyError) as exc:
            raise ContractError(f"bad network config {args.config}: {exc}") from exc
    dataset = import_dataset(args.data)
    model = Model(config, seed=args.seed)

    def log(ep, loss):
        if args.verbose:
            print(f"epoch {ep + 1:4d}  loss {loss:.4f}", file=sys.stderr)

    report = train(dataset, model, args.epochs, args.lr, args.seed, log=log)
    save_model(model, args.out)
    Path(args.out + ".train.json").write_text(json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n",
                                              encoding="utf-8")
    if args.plot:
        loss_curve(report.epoch_losses, args.plot)
    acc = ", ".join(f"{k} {v:.3f}" for k, v in report.accuracies.items())
    print(f"trained {args.epochs} epochs in {report.seconds:.1f} s; train accuracy {acc}")
    return 0


def cmd_eval(args) -> int:
    items = read_corpus(Path(args.data) / QA_FILE)
    graphs = _graphs(Path(args.data), args.model)
    executor = "soft" if args.soft else "symbolic"
    report, log = eh.evaluate_pipeline(items, graphs, executor)
    settings = {"data": Path(args.data).name, "model": Path(args.model).name if args.model else None,
                "executor": executor}
    eh.write_report(eh.report_document(report, log, settings), args.report)
    print(eh.render_table(report, _label(settings), references=False), end="")
    return 0


def _label(settings) -> str:
    graph = "model" if settings.get("model") else "ground truth"
    return f"This run ({graph}, {settings.get('executor')})"


def cmd_ask(args) -> int:
    from .videonet import load_model, predict_clip, predicted_graph

    clip = load_clip(args.clip)
    truth = load_truth(Path(args.clip).with_suffix(".json"))
    graph = truth.graph
    if args.model:
        graph = predicted_graph(truth, predict_clip(load_model(args.model), clip, truth))
    n = eh.ask_repl(graph, sys.stdin, sys.stdout, args.log, "soft" if args.soft else "symbolic")
    print(f"{n} questions logged to {args.log}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    report, doc = eh.read_report(args.input)
    print(eh.render_table(report, _label(doc.get("settings", {}))), end="")
    print("\t".join(["Grades"] + [f"{c}: " + "/".join(f"{k[0]}{v}" for k, v in doc["categories"][c]["grades"].items())
                                  for c in doc["categories"]]))
    if args.figures:
        from .plotting import category_bars

        out = Path(args.figures)
        out.mkdir(parents=True, exist_ok=True)
        path = category_bars(report, out / "category_accuracy.png", _label(doc.get("settings", {})))
        print(f"figure written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="videoqa", description="Synthetic video question answering pipeline.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render clips and generate questions")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=8)
    g.add_argument("--out", required=True)
    g.add_argument("--objects", type=int, default=5)
    g.add_argument("--frames", type=int, default=24)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--events", type=int, default=3)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the two-stream network on a generated dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--config", help="network config JSON (default architecture if omitted)")
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--lr", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=7)
    t.add_argument("--plot", help="write the loss curve to this PNG")
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="answer and grade the dataset questions")
    e.add_argument("--data", required=True)
    src = e.add_mutually_exclusive_group()
    src.add_argument("--model")
    src.add_argument("--ground-truth", action="store_true", help="use ground-truth scene graphs (default)")
    ex = e.add_mutually_exclusive_group()
    ex.add_argument("--soft", action="store_true")
    ex.add_argument("--symbolic", action="store_true", help="symbolic executor (default)")
    e.add_argument("--report", required=True)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ask", help="interactive questions about one clip")
    a.add_argument("--clip", required=True)
    a.add_argument("--model")
    a.add_argument("--soft", action="store_true")
    a.add_argument("--log", required=True)
    a.set_defaults(func=cmd_ask)

    r = sub.add_parser("report", help="render an evaluation report as a table")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--figures", help="directory for PNG figures")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VideoQAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return LoadError.exit_code


if __name__ == "__main__":
    sys.exit(main())
