"""Cluster learned embeddings and read the clusters through indicators.

Reuses the encoder trained by 02_learn_embeddings.py (runs it first if
needed), embeds every window, picks k with the elbow rule, clusters with
K-means, then prints the per-cluster indicator report card and one
agent's profile. Shows how embedding space organizes trading behavior
without ever labeling it.

Run:  python3 demos/03_cluster_and_profile.py
"""

import runpy
from pathlib import Path

import numpy as np

from orderembed import clustering, synth
from orderembed.encoder import encode_batch
from orderembed.features import featurize_windows
from orderembed.indicators import (
    agent_profile,
    cluster_summary,
    indicators_for_windows,
)
from orderembed.orders import build_all_windows
from orderembed.training import Checkpoint

OUT = Path(__file__).resolve().parent.parent / "demo_out"


def main() -> None:
    if not (OUT / "demo_model.json").exists():
        print("training the demo encoder first...\n")
        runpy.run_path(str(Path(__file__).parent / "02_learn_embeddings.py"),
                       run_name="__main__")
        print()

    ckpt = Checkpoint.load(OUT / "demo_model.json")
    config = synth.default_market_config(seed=11, n_days=6,
                                         agents_per_archetype=1)
    log = synth.generate(config)
    windows = build_all_windows(log, stride=50)
    feats = featurize_windows(windows, ckpt.feature_set, ckpt.norm)
    emb = encode_batch(ckpt.params, feats).astype(np.float64)

    elbow = clustering.elbow_select(emb, k_range=range(2, 10), seed=11)
    flag = " (low confidence)" if elbow.low_confidence else ""
    print(f"elbow rule picks k = {elbow.k_star}{flag}; "
          f"wcss by k: " + ", ".join(f"{k}:{w:.0f}" for k, w in
                                     zip(elbow.ks, elbow.wcss)))

    model = clustering.kmeans(emb, elbow.k_star, seed=11)
    frame = indicators_for_windows(windows)
    summary = cluster_summary(frame, model.labels)

    print("\ncluster report card (median, tercile rating):")
    for cluster in sorted(summary["cluster"].unique()):
        sub = summary[summary["cluster"] == cluster]
        n = int(sub["n_samples"].iloc[0])
        cells = [f"{r.indicator}={r.p50:.2f}{r.rating:>4}"
                 for r in sub.itertuples()
                 if r.indicator in ("frequency", "order_size", "fill_rate",
                                    "direction", "modif_frac")]
        print(f"  cluster {cluster} ({n:>3} windows): " + "  ".join(cells))

    arch_of = synth.archetype_of_agent(config)
    print("\ndominant cluster per agent:")
    for agent in sorted(arch_of):
        mask = windows.agent == agent
        counts = np.bincount(model.labels[mask], minlength=model.k)
        dom = int(counts.argmax())
        print(f"  agent {agent} ({arch_of[agent]:>16}): cluster {dom} "
              f"({counts[dom] / counts.sum():.0%} of windows)")

    agent = 5
    quant, hist, occ = agent_profile(agent, frame, model.labels, windows)
    print(f"\nagent {agent} ({arch_of[agent]}) trades by hour of day:")
    for row in hist.itertuples():
        print(f"  cluster {row.cluster}, {row.hour:02d}:00  "
              + "#" * int(row.count))

    proj, explained = clustering.pca(emb, 2)
    print(f"\nfirst two principal axes explain "
          f"{explained[0]:.0%} + {explained[1]:.0%} of embedding variance")


if __name__ == "__main__":
    main()
