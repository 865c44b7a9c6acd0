"""Track a drifting amplitude-damping strength with a particle filter.

The strength rises linearly from 0.2 by 1e-5 per cycle.  Every few hundred
cycles the script prints the truth, the filtered estimate and the effective
sample size.

    python demos/smc_drift_tracking.py [n_cycles]
"""

import sys

import numpy as np

from surfnoise.estimators import PriorBox, RandomWalkProposal, rng_stream, run_smc
from surfnoise.likelihood import sample_syndromes
from surfnoise.noise_models import NoiseFamily, NoiseSchedule, TimeVaryingNoise
from surfnoise.surface_code import build_rotated_layout


def main(n=4000, seed=0):
    layout = build_rotated_layout(3)
    family = NoiseFamily("amplitude_damping", layout.qubit_count)
    drift = TimeVaryingNoise(family, {"gamma": NoiseSchedule("line", 0.2, 1e-5)})
    batch = sample_syndromes(layout, drift, n, rng_stream(seed, 0))

    series = run_smc(batch, layout, family, PriorBox(family.default_domain()),
                     RandomWalkProposal([0.003]), n_particles=256, resample_interval=10,
                     smoothing=40, rng=rng_stream(seed, 2))
    truth = drift.alpha(np.arange(n))[:, 0]
    print(f"{'cycle':>6} {'truth':>7} {'smoothed':>9} {'ess':>6}")
    for i in range(0, n, max(1, n // 10)):
        print(f"{i:6d} {truth[i]:7.4f} {series.smoothed[i, 0]:9.4f} {series.ess[i]:6.1f}")
    warm = min(200, n // 2)
    mae = np.mean(np.abs(series.smoothed[warm:, 0] - truth[warm:]))
    print(f"mean absolute error after cycle {warm}: {mae:.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 4000)
