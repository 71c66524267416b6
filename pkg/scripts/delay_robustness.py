#!/usr/bin/env python3
"""Terminal loss of the delayed-gradient learner as the round trip grows.

Runs paired seeds on a similar-tasks environment (shared global labels,
observation noise) across a range of uplink+downlink delays. With a
delay-stable step the terminal loss should degrade only mildly; crank
--eta up to watch the delayed system destabilize.

Example:
    python scripts/delay_robustness.py --taus 0 4 10 20 40 --rollouts 10
"""

import argparse

import numpy as np

from fedres import HyperParams, gen_example2, run_fedres_sgd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--clients", type=int, default=4)
    ap.add_argument("--rounds", type=int, default=3000)
    ap.add_argument("--eta", type=float, default=0.002)
    ap.add_argument("--noise", type=float, default=0.2)
    ap.add_argument("--taus", type=int, nargs="+", default=[0, 4, 10, 20])
    ap.add_argument("--rollouts", type=int, default=10)
    ap.add_argument("--base-seed", type=int, default=0)
    args = ap.parse_args()

    hp = HyperParams(eta_global=args.eta, eta_local=args.eta)
    ug = np.array([0.8, 0.6])
    print("round-trip delay    terminal mean loss")
    for tau in args.taus:
        delays = (tau // 2, tau - tau // 2)
        losses = []
        for r in range(args.rollouts):
            ds = gen_example2(
                args.clients, 2, np.zeros(2), args.noise, args.rounds,
                args.base_seed + r, u_global=ug,
            )
            losses.append(
                run_fedres_sgd(ds, delays, hp, args.rounds, args.base_seed + r).terminal_mean_loss()
            )
        print(f"{tau:<18}  {np.mean(losses):.6g}")


if __name__ == "__main__":
    main()
