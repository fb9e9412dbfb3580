"""
Graph algorithms on nonnegative data
====================================

PIC, NCut and NJW work on an affinity matrix. For nonnegative data such as
term counts, the cosine similarity of the rows serves. NMF clusters by the
dominant factor of each row.
"""

import numpy as np
from iccluster import accuracy, cosine_similarity, partition_from_labels, run_algorithm

rng = np.random.default_rng(0)

# three "topics", each a distinct set of 15 terms, 40 documents per topic
docs, topics = [], []
for t in range(3):
    rate = np.full(45, 0.05)
    rate[15 * t:15 * (t + 1)] = 2.0
    docs.append(rng.poisson(rate, size=(40, 45)))
    topics += [t] * 40
X = np.vstack(docs).astype(float)
truth = partition_from_labels(topics)

S = cosine_similarity(X)
print("mean cosine within topic:", S.values[:40, :40].mean().round(3),
      "across:", S.values[:40, 40:].mean().round(3))

for name in ("kmeans", "pddp", "nmf", "pic", "ncut", "njw"):
    c = run_algorithm(name, X, 3, seed=0, restarts=10)
    print(f"{name:6s} accuracy {accuracy(c, truth):.3f}")
