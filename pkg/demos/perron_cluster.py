"""
Counting blocks with the Perron cluster
=======================================

A consensus graph made of k nearly disconnected blocks has k eigenvalues
near 1. The widest gap in the sorted spectrum marks the end of that group.
"""

import numpy as np
from iccluster import deviation_from_reducibility, noisy_block_matrix, spectrum, transition_matrix

sizes = [5, 5, 5]
labels = np.repeat([0, 1, 2], sizes)

# weaker coupling between blocks pushes the three leading eigenvalues to 1
for eps in (0.3, 0.1, 0.03, 0.01):
    S = noisy_block_matrix(sizes, eps, seed=0)
    rep = spectrum(S, m_max=6)
    delta = deviation_from_reducibility(transition_matrix(S), labels)
    print(f"eps={eps:<5} delta={delta:.3f} k={rep.k_estimate} "
          f"lambda={np.round(rep.eigenvalues, 3)}")
