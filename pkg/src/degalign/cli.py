"""Command-line entry points: features, train, eval, ablate, synth."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .features import node2vec_features, save_features
from .graphs import load_edge_list
from .pipeline import RunConfig, TrainedModel, evaluate, prepare_inputs, ablate, run
from .synth import generate_synthetic_pair


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _cmd_features(args) -> int:
    g = load_edge_list(_read(args.edges))
    feats = node2vec_features(
        g,
        dim=args.dim,
        walk_len=args.walk_len,
        walks_per_node=args.walks_per_node,
        window=args.window,
        p=args.p,
        q=args.q,
        negatives=args.negatives,
        epochs=args.epochs,
        rng_seed=args.seed,
    )
    Path(args.out).write_text(save_features(feats), encoding="utf-8")
    print(f"wrote {feats.num_nodes}x{feats.dim} features to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = RunConfig.from_json(_read(args.config))
    inputs = prepare_inputs(config)
    model, report = run(config, inputs)
    model.save(args.out)
    print(f"saved checkpoint to {args.out}")
    print(report.to_json())
    return 0


def _cmd_eval(args) -> int:
    model = TrainedModel.load(args.ckpt)
    inputs = prepare_inputs(
        model.config, graphs=(model.graph1, model.graph2),
        features=(model.features1, model.features2),
    )
    report = evaluate(model, inputs.test_anchors)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote report to {args.out}")
    else:
        print(text)
    return 0


def _cmd_ablate(args) -> int:
    config = RunConfig.from_json(_read(args.config))
    reports = ablate(config)
    header = f"{'variant':<10} {'Hits@1':>8} {'Hits@10':>8} {'Hits@30':>8} {'MRR':>8}"
    print(header)
    print("-" * len(header))
    for name, rep in reports.items():
        print(
            f"{name:<10} {rep.hits[1]:>8.4f} {rep.hits[10]:>8.4f} "
            f"{rep.hits[30]:>8.4f} {rep.mrr:>8.4f}"
        )
    return 0


def _cmd_synth(args) -> int:
    g1, g2, anchors = generate_synthetic_pair(
        n=args.n,
        power_exponent=args.exponent,
        noise_edges_on_top=args.noise,
        anchor_overlap=args.overlap,
        seed=args.seed,
        edge_dropout=args.dropout,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "edges1.txt").write_text(g1.to_edge_list_text(), encoding="utf-8")
    (out / "edges2.txt").write_text(g2.to_edge_list_text(), encoding="utf-8")
    anchor_text = "\n".join(f"{a} {b}" for a, b in anchors.pairs) + "\n"
    (out / "anchors.txt").write_text(anchor_text, encoding="utf-8")
    print(
        f"wrote {g1.num_edges} + {g2.num_edges} edges and "
        f"{len(anchors)} anchors to {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degalign",
        description="Degree-aware cross-network identity linkage",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="embed one network with node2vec")
    p.add_argument("edges")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--out", required=True)
    p.add_argument("--walk-len", type=int, default=80, dest="walk_len")
    p.add_argument("--walks-per-node", type=int, default=10, dest="walks_per_node")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train a linkage model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="compare full model with both ablations")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("synth", help="generate a synthetic benchmark pair")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--exponent", type=float, default=2.5)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--overlap", type=float, default=0.8)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single diagnostic line, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
