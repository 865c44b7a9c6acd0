"""Expected logical error of several decoders under amplitude damping.

Distance 3, exact enumeration over all syndromes.  Compares ML recovery with
the true model, ML with a misstated strength, ML assuming the Pauli twirl of
the true channel, and minimum-weight matching.  The metric is the diamond
distance of the corrected logical channel to the identity.

    python demos/decoder_comparison.py [gamma]
"""

import sys

from surfnoise.decoders import MLDecoder, MWPMDecoder, estimate_process_choi, pauli_twirl
from surfnoise.noise_models import NoiseFamily
from surfnoise.surface_code import build_rotated_layout


def main(gamma=0.3):
    layout = build_rotated_layout(3)
    family = NoiseFamily("amplitude_damping", layout.qubit_count)
    truth = family.model([gamma])
    pauli = NoiseFamily("pauli", layout.qubit_count)
    decoders = {
        "ML, true model": MLDecoder(layout, truth),
        f"ML, gamma={gamma - 0.1:.2f}": MLDecoder(layout, family.model([gamma - 0.1])),
        f"ML, gamma={gamma + 0.1:.2f}": MLDecoder(layout, family.model([gamma + 0.1])),
        "ML, Pauli twirl": MLDecoder(layout, pauli.model(pauli_twirl("amplitude_damping", [gamma]))),
        "MWPM": MWPMDecoder(layout),
    }
    for name, dec in decoders.items():
        est = estimate_process_choi(layout, dec, truth, exact=True)
        print(f"{name:<18} {est.metric:.5f}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.3)
