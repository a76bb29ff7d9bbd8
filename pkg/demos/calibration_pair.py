"""Why reward-space regret misranks failures.

Two tiny decision problems with almost the same hindsight reward gap: in the
first the robot passed up one clearly-best action, in the second the best
action was one of several near-ties. A reward-gap metric calls them equal;
the likelihood metric only penalizes the first.
"""

from regret_miner.regret import build_calibration_pair


def main():
    scene_a, scene_b, canon, gen = build_calibration_pair()
    print("scene A rewards:", scene_a.rewards, "executed:", scene_a.executed_index)
    print("scene B rewards:", scene_b.rewards, "executed:", scene_b.executed_index)
    print()
    print(f"reward-space regret:     A = {canon[0]:.2f}   B = {canon[1]:.2f}"
          f"   (within {abs(canon[0] - canon[1]) / max(canon):.1%})")
    print(f"likelihood-space regret: A = {gen[0]:.2f}   B = {gen[1]:.2f}"
          f"   (ratio {gen[0] / gen[1]:.2f}x)")
    print()
    print("A gave up a concentrated likelihood mass; B's best option was")
    print("nearly tied with two others, so skipping it cost little.")


if __name__ == "__main__":
    main()
