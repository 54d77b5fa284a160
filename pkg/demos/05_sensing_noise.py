"""Sweep the sensing flip probability and watch the reward respond.

Three regimes show up.  Up to moderate noise the informed devices still
avoid busy RBs, but their shared beliefs make them crowd the same momentarily
attractive RB; extra noise actually decorrelates their choices and the mean
reward rises.  At chance level the readings carry nothing, every belief
collapses to the chain's stationary point, and the deterministic tie-break
sends all devices to the first RB of their slice, which is the worst case.
Beyond chance level the planner caps its trust (a mostly-wrong sensor is not
an inverted oracle), so the curve stays flat instead of recovering.
"""

import dataclasses

import numpy as np

from m2msim import load_config, run_simulation, with_axis_value


def main() -> None:
    base = load_config("five-slice",
                       ["timebase.periods=15", "controller_enabled=false"])
    seeds = range(1, 9)
    perfect = dataclasses.replace(base, policy_mode="perfect")

    print("eps    informed      clairvoyant   ratio")
    for eps in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8):
        variant = with_axis_value(base, "epsilon", eps)
        inf = np.mean([run_simulation(dataclasses.replace(variant, seed=s)
                                      ).mean_discounted_reward for s in seeds])
        clair = np.mean([run_simulation(dataclasses.replace(perfect, seed=s)
                                        ).mean_discounted_reward for s in seeds])
        print(f"{eps:.1f}  {inf:12.4g}  {clair:12.4g}  {inf / clair:6.3f}")


if __name__ == "__main__":
    main()
