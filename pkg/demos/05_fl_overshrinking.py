"""Show how a bad power model wastes energy in federated learning.

Each peer gets an energy budget per round and shrinks its local workload
by a factor alpha so the estimated cost fits the budget. If the cost
estimator over-predicts (the cubic frequency model over-predicts by 3x
to 8x at handset operating points), alpha shrinks by exactly that
over-prediction ratio, rounds do less useful work, and the run needs
more of them, spending more true energy to reach the same accuracy.

Both runs below share seeds, peers, data, and budgets; only the cost
estimator differs.
"""

import argparse
import statistics

from socpower.flsim import (
    ANALYTICAL,
    APPROXIMATE,
    FlConfig,
    default_peer_profiles,
    run_simulation,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--target", type=float, default=0.8)
    args = parser.parse_args()

    config = FlConfig(seed=args.seed, target_accuracy=args.target)
    peers = default_peer_profiles(
        config.n_peers,
        [config.shard_size] * config.n_peers,
        config.tau,
        config.w_sample,
    )
    print("peer fleet (budgets sized for alpha = 0.8 under the analytical cost):")
    for peer in peers:
        print(
            f"  {peer.id}: {peer.cluster.name} cluster at {peer.freq_hz / 1e9:.2f} GHz, "
            f"over-prediction ratio {peer.over_prediction_ratio():.2f}x"
        )
    print()

    runs = {}
    for estimator in (ANALYTICAL, APPROXIMATE):
        records = run_simulation(FlConfig(seed=args.seed, target_accuracy=args.target, estimator=estimator))
        runs[estimator] = records
        alphas = sorted({round(p.alpha, 4) for rec in records for p in rec.peers})
        print(
            f"{estimator:>11}: {len(records)} rounds to reach "
            f"{records[-1].global_accuracy:.3f} accuracy, "
            f"energy {records[-1].cumulative_true_energy_j:.1f} J, "
            f"alphas {alphas[0]:.3f}..{alphas[-1]:.3f}"
        )

    e_ana = runs[ANALYTICAL][-1].cumulative_true_energy_j
    e_apx = runs[APPROXIMATE][-1].cumulative_true_energy_j
    print()
    print(f"energy overhead from over-shrinking: {e_apx / e_ana:.2f}x")

    alpha_by_round = [
        (
            rec_a.round_index,
            statistics.mean(p.alpha for p in rec_a.peers),
            statistics.mean(p.alpha for p in rec_b.peers),
        )
        for rec_a, rec_b in zip(runs[ANALYTICAL], runs[APPROXIMATE])
    ]
    print()
    print(f"{'round':>5} {'mean alpha (analytical)':>24} {'mean alpha (approximate)':>25}")
    for idx, a, b in alpha_by_round[:5]:
        print(f"{idx:>5} {a:>24.3f} {b:>25.3f}")


if __name__ == "__main__":
    main()
