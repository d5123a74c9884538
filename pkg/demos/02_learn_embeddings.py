"""Learn order-flow embeddings with the triplet objective, end to end.

Builds 50-order windows from a small synthetic corpus, samples triplets
(anchor and positive from the same agent, negative from another), trains
the two-layer LSTM encoder for a few epochs, and scores the triplet
failure rate on held-out days. Artifacts land in demo_out/.

Run:  python3 demos/02_learn_embeddings.py
"""

from pathlib import Path

import numpy as np

from orderembed import synth
from orderembed import triplets as trip
from orderembed.encoder import EncoderConfig, init_params
from orderembed.evaluation import evaluate
from orderembed.features import FeatureSet, featurize_windows, fit_normalization
from orderembed.orders import build_all_windows
from orderembed.training import AdamConfig, TrainConfig, save_loss_history, train

OUT = Path(__file__).resolve().parent.parent / "demo_out"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    config = synth.default_market_config(seed=11, n_days=6,
                                         agents_per_archetype=1)
    log = synth.generate(config)
    windows = build_all_windows(log, stride=50)
    split = trip.split_days(np.unique(log.day), seed=11)
    print(f"{len(windows)} windows; train days {sorted(split.train_days)}, "
          f"test days {sorted(split.test_days)}")

    sides = {}
    for side, count in (("train", 2000), ("test", 1000)):
        days = split.train_days if side == "train" else split.test_days
        idx = np.flatnonzero(np.isin(windows.day, sorted(days)))
        local = trip.sample_triplets(windows.take(idx), count, seed=11)
        sides[side] = idx[local]

    fs = FeatureSet("basic_m_qs")
    train_idx = np.flatnonzero(np.isin(windows.day,
                                       sorted(split.train_days)))
    norm = fit_normalization(windows.take(train_idx), fs)
    feats = featurize_windows(windows, fs, norm)

    enc = EncoderConfig(input_width=fs.width)
    tc = TrainConfig(epochs=6, batch_size=64, adam=AdamConfig(lr=0.002),
                     seed=11, dtype="float32")
    anchor_agents = windows.agent[sides["test"][:, 0]]

    before = evaluate(init_params(enc, 11, dtype=np.float32), feats,
                      sides["test"], anchor_agents)
    print(f"failure rate before training: {before.rate:.3f}")

    ckpt = train(feats, sides["train"], enc, tc, norm,
                 checkpoint_path=OUT / "demo_model.json", log=print)
    save_loss_history(OUT / "demo_loss.csv", ckpt.loss_history)

    after = evaluate(ckpt.params, feats, sides["test"], anchor_agents)
    print(f"failure rate after training:  {after.rate:.3f} "
          f"({after.ties} ties on {after.n_triplets} triplets)")
    print("\nper-agent failure rates:")
    for agent, stats in sorted(after.per_agent.items()):
        print(f"  agent {agent}: {stats['rate']:.3f} "
              f"on {stats['n_anchors']} anchors")
    print(f"\nmodel and loss curve written to {OUT}/")


if __name__ == "__main__":
    main()
