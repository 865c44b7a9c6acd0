"""Recover a uniform amplitude-damping strength from simulated syndromes.

Samples n cycles on a distance-3 rotated code, runs a random-walk Metropolis
chain on the likelihood and prints the posterior mean and a 95% interval.

    python demos/mcmc_amplitude_damping.py [gamma] [n]
"""

import sys

import numpy as np

from surfnoise.estimators import PriorBox, RandomWalkProposal, rng_stream, run_mcmc
from surfnoise.likelihood import sample_syndromes
from surfnoise.noise_models import NoiseFamily
from surfnoise.surface_code import build_rotated_layout


def main(gamma=0.15, n=1000, seed=0):
    layout = build_rotated_layout(3)
    family = NoiseFamily("amplitude_damping", layout.qubit_count)
    batch = sample_syndromes(layout, family.model([gamma]), n, rng_stream(seed, 0))
    uniq, counts = batch.unique_counts()
    print(f"{n} cycles, {len(uniq)} distinct syndromes, all-trivial fraction "
          f"{counts[np.all(uniq == 1, axis=1)].sum() / n:.3f}")

    prior = PriorBox(family.default_domain())
    # posterior width shrinks like 1/sqrt(n); scale the step with it
    step = 0.2 / np.sqrt(n)
    trace = run_mcmc(batch, layout, family, prior, RandomWalkProposal([step]),
                     total=2000, burn_in=500, rng=rng_stream(seed, 1))
    lo, mid, hi = trace.quantiles()[:, 0]
    print(f"true gamma {gamma:.3f}")
    print(f"EAP        {trace.eap()[0]:.4f}  (median {mid:.4f}, 95% [{lo:.4f}, {hi:.4f}])")
    print(f"acceptance {trace.acceptance_ratio:.2f}")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(float(args[0]) if args else 0.15, int(args[1]) if len(args) > 1 else 1000)
