"""Command-line pipeline driver.

Stages communicate through files only (CSV/JSON), so every stage can be
re-run and inspected independently. One --seed pins all randomness; a
full pipeline rerun from the same seed writes byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import clustering, indicators as ind, synth, triplets as trip
from .encoder import EncoderConfig, grad_check
from .evaluation import evaluate, run_ablation
from .features import FeatureSet, featurize_windows, fit_normalization
from .orders import OrderLog, WindowSet, build_all_windows
from .optim import AdamConfig
from .training import Checkpoint, TrainConfig, save_loss_history, train

GRADCHECK_TOL = 1e-4


def _load_market_config(args) -> synth.MarketConfig:
    if args.config:
        with open(args.config) as fh:
            return synth.MarketConfig.from_dict(json.load(fh))
    n_arch = len(synth.default_archetypes())
    if args.agents % n_arch != 0:
        raise ValueError(f"--agents must be a multiple of {n_arch} "
                         "(one share per archetype); or use --config")
    return synth.default_market_config(
        seed=args.seed, n_days=args.days,
        agents_per_archetype=args.agents // n_arch)


def cmd_generate(args) -> int:
    config = _load_market_config(args)
    if args.passive:
        log, passive = synth.generate_tape(config)
        passive.to_csv(args.passive)
    else:
        log = synth.generate(config)
    log.to_csv(args.output)
    print(f"wrote {len(log)} orders for {len(config.agents)} agents "
          f"over {config.n_days} days to {args.output}")
    return 0


def cmd_windows(args) -> int:
    log = OrderLog.from_csv(args.orders)
    windows = build_all_windows(log, stride=args.stride)
    windows.to_csv(args.output)
    print(f"wrote {len(windows)} windows (stride {args.stride}) "
          f"to {args.output}")
    return 0


def _load_split(path, days, seed) -> trip.DaySplit:
    p = Path(path)
    if p.exists():
        with open(p) as fh:
            split = trip.DaySplit.from_dict(json.load(fh))
        split.validate(days)
        return split
    split = trip.split_days(days, seed=seed)
    with open(p, "w") as fh:
        json.dump(split.to_dict(), fh)
    return split


def cmd_triplets(args) -> int:
    log = OrderLog.from_csv(args.orders)
    windows = WindowSet.from_csv(args.windows, log)
    split = _load_split(args.split, np.unique(log.day), args.seed)
    days = split.train_days if args.side == "train" else split.test_days
    idx = np.flatnonzero(np.isin(windows.day, sorted(days)))
    if len(idx) == 0:
        raise ValueError(f"no windows on {args.side} days")
    local = trip.sample_triplets(windows.take(idx), count=args.count,
                                 seed=args.seed, horizon_s=args.horizon)
    trip.save_triplets(args.output, idx[local])
    print(f"wrote {args.count} {args.side} triplets to {args.output}")
    return 0


def _featurize_all(log, windows, fs, split) -> tuple:
    """Fit normalization on train-day windows, featurize every window."""
    train_mask = np.isin(windows.day, sorted(split.train_days))
    if not train_mask.any():
        raise ValueError("no training-day windows to fit normalization on")
    norm = fit_normalization(windows.take(np.flatnonzero(train_mask)), fs)
    return featurize_windows(windows, fs, norm), norm


def cmd_train(args) -> int:
    log = OrderLog.from_csv(args.orders)
    windows = WindowSet.from_csv(args.windows, log)
    split = _load_split(args.split, np.unique(log.day), args.seed)
    triplet_idx = trip.load_triplets(args.triplets)
    train_days = np.array(sorted(split.train_days))
    if not np.isin(windows.day[triplet_idx.ravel()], train_days).all():
        raise ValueError("training triplets reference non-training days")

    fs = FeatureSet(args.feature_set)
    feats, norm = _featurize_all(log, windows, fs, split)
    epochs = 500 if args.paper_scale else args.epochs
    encoder_config = EncoderConfig(input_width=fs.width, hidden1=args.hidden1,
                                   hidden2=args.hidden2, margin=args.margin)
    train_config = TrainConfig(epochs=epochs, batch_size=args.batch,
                               adam=AdamConfig(lr=args.lr), seed=args.seed,
                               dtype=args.dtype, threads=args.threads,
                               checkpoint_every=args.checkpoint_every)
    resume = Checkpoint.load(args.resume) if args.resume else None
    ckpt = train(feats, triplet_idx, encoder_config, train_config, norm,
                 checkpoint_path=args.output, resume=resume,
                 log=print if args.verbose else None)
    if args.loss_csv:
        save_loss_history(args.loss_csv, ckpt.loss_history)
    final = ckpt.loss_history[-1] if ckpt.loss_history else float("nan")
    print(f"trained {epochs} epochs on {len(triplet_idx)} triplets; "
          f"final mean loss {final:.6f}; model at {args.output}")
    return 0


def cmd_eval(args) -> int:
    ckpt = Checkpoint.load(args.model)
    if ckpt.norm is None:
        raise ValueError("checkpoint has no normalization stats")
    log = OrderLog.from_csv(args.orders)
    windows = WindowSet.from_csv(args.windows, log)
    triplet_idx = trip.load_triplets(args.triplets)
    feats = featurize_windows(windows, ckpt.norm.feature_set, ckpt.norm)
    report = evaluate(ckpt.params, feats, triplet_idx,
                      windows.agent[triplet_idx[:, 0]],
                      feature_set=ckpt.norm.feature_set.variant)
    report.to_csv(args.output)
    print(f"failure rate {report.rate:.4f} ({report.failures}/"
          f"{report.n_triplets}, {report.ties} ties) -> {args.output}")
    return 0


def cmd_ablate(args) -> int:
    log = OrderLog.from_csv(args.orders)
    windows = WindowSet.from_csv(args.windows, log)
    split = _load_split(args.split, np.unique(log.day), args.seed)
    tr = trip.load_triplets(args.train_triplets)
    te = trip.load_triplets(args.test_triplets)

    train_idx = np.flatnonzero(np.isin(windows.day,
                                       sorted(split.train_days)))
    test_idx = np.flatnonzero(np.isin(windows.day, sorted(split.test_days)))
    to_local_train = _global_to_local(len(windows), train_idx)
    to_local_test = _global_to_local(len(windows), test_idx)
    tr_local = to_local_train[tr]
    te_local = to_local_test[te]
    if (tr_local < 0).any() or (te_local < 0).any():
        raise ValueError("triplets reference windows outside their split side")

    train_config = TrainConfig(epochs=args.epochs, batch_size=args.batch,
                               adam=AdamConfig(lr=args.lr), seed=args.seed,
                               dtype=args.dtype, threads=args.threads)
    table = run_ablation(windows.take(train_idx), windows.take(test_idx),
                         tr_local, te_local, train_config,
                         hidden1=args.hidden1, hidden2=args.hidden2,
                         margin=args.margin,
                         log=print if args.verbose else None)
    table.to_csv(args.output, index=False)
    summary = table[table["agent"] == "ALL"][["feature_set", "failure_rate"]]
    print(summary.to_string(index=False))
    return 0


def _global_to_local(n: int, idx: np.ndarray) -> np.ndarray:
    lookup = np.full(n, -1, dtype=np.int64)
    lookup[idx] = np.arange(len(idx))
    return lookup


def cmd_cluster(args) -> int:
    ckpt = Checkpoint.load(args.model)
    if ckpt.norm is None:
        raise ValueError("checkpoint has no normalization stats")
    log = OrderLog.from_csv(args.orders)
    windows = WindowSet.from_csv(args.windows, log)
    feats = featurize_windows(windows, ckpt.norm.feature_set, ckpt.norm)
    from .encoder import encode_batch
    emb = encode_batch(ckpt.params, feats).astype(np.float64)

    if args.k:
        k = args.k
    else:
        lo, hi = args.k_range
        elbow = clustering.elbow_select(emb, range(lo, hi + 1),
                                        seed=args.seed)
        k = elbow.k_star
        flag = " (low confidence)" if elbow.low_confidence else ""
        print(f"elbow selected k = {k}{flag}")
        if args.elbow_csv:
            elbow.to_frame().to_csv(args.elbow_csv, index=False)
    model = clustering.kmeans(emb, k, seed=args.seed)
    model.to_json(args.output)
    clustering.write_assignments(args.assignments, windows.agent,
                                 model.labels)
    if args.pca:
        proj, ratios = clustering.pca(emb, args.pca_dim)
        import pandas as pd
        cols = {f"pc{i + 1}": proj[:, i] for i in range(args.pca_dim)}
        pd.DataFrame({"sample_id": np.arange(len(emb)),
                      "agent": windows.agent, "cluster": model.labels,
                      **cols}).to_csv(args.pca, index=False)
        print("pca explained variance: "
              + ", ".join(f"{r:.4f}" for r in ratios))
    print(f"k = {model.k}, wcss = {model.wcss:.4f}, "
          f"iterations = {model.iterations} -> {args.output}")
    return 0


def cmd_indicators(args) -> int:
    log = OrderLog.from_csv(args.orders)
    windows = WindowSet.from_csv(args.windows, log)
    assignments = clustering.read_assignments(args.assignments)
    if len(assignments) != len(windows):
        raise ValueError("assignments do not cover the window set")
    labels = assignments["cluster"].to_numpy(np.int64)
    frame = ind.indicators_for_windows(windows)
    ind.write_indicator_csv(args.output, frame, labels)
    if args.summary:
        ind.cluster_summary(frame, labels).to_csv(args.summary, index=False)
    if args.profile_agent is not None:
        quant, hours, occ = ind.agent_profile(args.profile_agent, frame,
                                              labels, windows)
        prefix = args.profile_prefix or f"agent{args.profile_agent}"
        quant.to_csv(f"{prefix}_quantiles.csv", index=False)
        hours.to_csv(f"{prefix}_hours.csv", index=False)
        occ.to_csv(f"{prefix}_occurrences.csv", index=False)
    if args.ratios:
        if not args.passive:
            raise ValueError("--ratios needs --passive fills")
        passive = synth.PassiveFills.from_csv(args.passive)
        import pandas as pd
        agents = np.unique(log.agent)
        pd.DataFrame({
            "agent": agents,
            "ratio": [ind.passive_aggressive_ratio(log, passive, int(a))
                      for a in agents],
        }).to_csv(args.ratios, index=False)
    print(f"wrote indicators for {len(windows)} windows to {args.output}")
    return 0


def cmd_report(args) -> int:
    """End-to-end run: generate -> windows -> triplets -> train -> eval
    -> cluster -> indicators, all inside --workdir."""
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    config = _load_market_config(args)

    log, passive = synth.generate_tape(config)
    log.to_csv(wd / "orders.csv")
    passive.to_csv(wd / "passive.csv")
    windows = build_all_windows(log, stride=args.stride)
    windows.to_csv(wd / "windows.csv")

    split = _load_split(wd / "split.json", np.unique(log.day), args.seed)
    sides = {}
    for side, count in (("train", args.train_triplets),
                        ("test", args.test_triplets)):
        days = split.train_days if side == "train" else split.test_days
        idx = np.flatnonzero(np.isin(windows.day, sorted(days)))
        local = trip.sample_triplets(windows.take(idx), count=count,
                                     seed=args.seed, horizon_s=args.horizon)
        sides[side] = idx[local]
        trip.save_triplets(wd / f"triplets_{side}.csv", sides[side])

    fs = FeatureSet(args.feature_set)
    feats, norm = _featurize_all(log, windows, fs, split)
    encoder_config = EncoderConfig(input_width=fs.width)
    train_config = TrainConfig(epochs=args.epochs, batch_size=args.batch,
                               adam=AdamConfig(lr=args.lr), seed=args.seed,
                               dtype=args.dtype, threads=args.threads)
    ckpt = train(feats, sides["train"], encoder_config, train_config, norm,
                 checkpoint_path=wd / "model.json",
                 log=print if args.verbose else None)
    save_loss_history(wd / "loss.csv", ckpt.loss_history)

    report = evaluate(ckpt.params, feats, sides["test"],
                      windows.agent[sides["test"][:, 0]],
                      feature_set=fs.variant)
    report.to_csv(wd / "eval.csv")

    from .encoder import encode_batch
    emb = encode_batch(ckpt.params, feats).astype(np.float64)
    model = clustering.kmeans(emb, args.k, seed=args.seed)
    model.to_json(wd / "cluster.json")
    clustering.write_assignments(wd / "assignments.csv", windows.agent,
                                 model.labels)

    frame = ind.indicators_for_windows(windows)
    ind.write_indicator_csv(wd / "indicators.csv", frame, model.labels)
    ind.cluster_summary(frame, model.labels).to_csv(wd / "summary.csv",
                                                    index=False)
    print(f"pipeline complete: failure rate {report.rate:.4f}, "
          f"k = {model.k}; artifacts in {wd}")
    return 0


def cmd_gradcheck(args) -> int:
    config = EncoderConfig(input_width=args.input_width,
                           hidden1=args.hidden1, hidden2=args.hidden2)
    worst = 0.0
    for seed in range(args.seed, args.seed + args.seeds):
        err = grad_check(config, seed)
        worst = max(worst, err)
        print(f"seed {seed}: max relative error {err:.3e}")
    print(f"worst over {args.seeds} seeds: {worst:.3e} "
          f"(tolerance {GRADCHECK_TOL:.0e})")
    return 0 if worst < GRADCHECK_TOL else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orderembed",
        description="Self-supervised order-flow embeddings: synthetic "
                    "data, triplet training, evaluation, clustering, "
                    "behavioral indicators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic order tape")
    p.add_argument("--agents", type=int, default=30,
                   help="agent count, split evenly over the 6 archetypes")
    p.add_argument("--days", type=int, default=25)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--config", help="market config JSON (overrides flags)")
    p.add_argument("--passive", help="also write passive fills CSV here")
    p.add_argument("-o", "--output", required=True, help="orders CSV")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("windows", help="cut an order tape into 50-order "
                                       "windows")
    p.add_argument("--orders", required=True)
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("-o", "--output", required=True, help="window manifest CSV")
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("triplets", help="sample anchor/positive/negative "
                                        "window triplets")
    p.add_argument("--orders", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--split", required=True,
                   help="day-split JSON (created if missing)")
    p.add_argument("--side", choices=("train", "test"), default="train")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=trip.DEFAULT_HORIZON_S,
                   help="locality horizon in seconds")
    p.add_argument("-o", "--output", required=True, help="triplet CSV")
    p.set_defaults(func=cmd_triplets)

    p = sub.add_parser("train", help="train the triplet-loss encoder")
    p.add_argument("--orders", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--triplets", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--feature-set", default="basic_m_qs",
                   choices=("basic", "basic_m", "basic_m_qs"))
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--hidden1", type=int, default=100)
    p.add_argument("--hidden2", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dtype", choices=("float32", "float64"),
                   default="float32")
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--paper-scale", action="store_true",
                   help="500 epochs (pair with a 100k-triplet corpus)")
    p.add_argument("--loss-csv")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("-o", "--output", required=True, help="model checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="failure rate on held-out triplets")
    p.add_argument("--model", required=True)
    p.add_argument("--orders", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--triplets", required=True)
    p.add_argument("-o", "--output", required=True, help="report CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train + evaluate all three feature "
                                      "sets on shared triplets")
    p.add_argument("--orders", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--train-triplets", required=True)
    p.add_argument("--test-triplets", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--hidden1", type=int, default=100)
    p.add_argument("--hidden2", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dtype", choices=("float32", "float64"),
                   default="float32")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("-o", "--output", required=True, help="ablation CSV")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("cluster", help="k-means over embeddings")
    p.add_argument("--model", required=True)
    p.add_argument("--orders", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--k", type=int, help="fixed k; omit to use the elbow")
    p.add_argument("--k-range", type=int, nargs=2, default=(2, 12),
                   metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--elbow-csv", help="write the WCSS curve here")
    p.add_argument("--pca", help="write PCA-projected embeddings here")
    p.add_argument("--pca-dim", type=int, default=2)
    p.add_argument("--assignments", required=True)
    p.add_argument("-o", "--output", required=True, help="cluster model JSON")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("indicators", help="behavioral indicators per window")
    p.add_argument("--orders", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--summary", help="per-cluster quantile/rating CSV")
    p.add_argument("--profile-agent", type=int)
    p.add_argument("--profile-prefix")
    p.add_argument("--passive", help="passive fills CSV from generate")
    p.add_argument("--ratios", help="per-agent passive/aggressive CSV")
    p.add_argument("-o", "--output", required=True, help="indicator CSV")
    p.set_defaults(func=cmd_indicators)

    p = sub.add_parser("report", help="run the whole pipeline into a "
                                      "working directory")
    p.add_argument("--workdir", required=True)
    p.add_argument("--agents", type=int, default=30)
    p.add_argument("--days", type=int, default=25)
    p.add_argument("--config", help="market config JSON (overrides flags)")
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("--train-triplets", type=int, default=20000)
    p.add_argument("--test-triplets", type=int, default=10000)
    p.add_argument("--horizon", type=float, default=trip.DEFAULT_HORIZON_S)
    p.add_argument("--feature-set", default="basic_m_qs",
                   choices=("basic", "basic_m", "basic_m_qs"))
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dtype", choices=("float32", "float64"),
                   default="float32")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gradcheck", help="verify BPTT gradients against "
                                         "finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=10,
                   help="number of consecutive seeds to check")
    p.add_argument("--input-width", type=int, default=2)
    p.add_argument("--hidden1", type=int, default=3)
    p.add_argument("--hidden2", type=int, default=2)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
