"""Log-likelihood over (gamma, p) for generalized amplitude damping.

The excitation probability p barely moves the syndrome statistics: the
printed grid is sharp along gamma and nearly flat along p.

    python demos/gad_heatmap.py [n]
"""

import sys

import numpy as np

from surfnoise.estimators import rng_stream
from surfnoise.likelihood import get_evaluator, sample_syndromes
from surfnoise.noise_models import NoiseFamily
from surfnoise.surface_code import build_rotated_layout


def main(n=2000, truth=(0.2, 0.7), seed=0):
    layout = build_rotated_layout(3)
    family = NoiseFamily("generalized_amplitude_damping", layout.qubit_count)
    batch = sample_syndromes(layout, family.model(truth), n, rng_stream(seed, 0))
    uniq, counts = batch.unique_counts()
    ev = get_evaluator(layout, family)

    gammas = np.linspace(0.1, 0.3, 9)
    ps = np.linspace(0.1, 0.9, 9)
    grid = np.array([[counts @ ev.log_probabilities(np.array([g, p]), uniq) for p in ps]
                     for g in gammas])
    grid -= grid.max()

    print("log-likelihood minus max; rows gamma, columns p")
    print("gamma\\p " + " ".join(f"{p:7.2f}" for p in ps))
    for g, row in zip(gammas, grid):
        print(f"{g:7.3f} " + " ".join(f"{v:7.1f}" for v in row))
    i, j = np.unravel_index(np.argmax(grid), grid.shape)
    print(f"argmax gamma {gammas[i]:.3f}, p {ps[j]:.2f}  (truth {truth[0]}, {truth[1]})")
    print(f"range along gamma {np.ptp(grid[:, j]):.1f}, along p {np.ptp(grid[i]):.2f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2000)
