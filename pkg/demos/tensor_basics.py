"""Unfoldings, Khatri-Rao products and the MTTKRP on a small tensor.

Run: python demos/tensor_basics.py
"""
import numpy as np

from auxcpd.tensor import KruskalModel, fold, khatri_rao, mttkrp, reconstruct, unfold

t = np.arange(24, dtype=float).reshape(2, 3, 4, order="F")

# column-major linearization: entry (i, j, k) sits at i + 2 j + 6 k
print("mode-1 unfolding:\n", unfold(t, 0))
print("mode-2 unfolding:\n", unfold(t, 1))
assert np.array_equal(fold(unfold(t, 2), 2, t.shape), t)

a, b = np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
print("khatri_rao(a, b):\n", khatri_rao(a, b))

rng = np.random.default_rng(0)
model = KruskalModel([rng.uniform(size=(n, 2)) for n in (2, 3, 4)])
x = reconstruct(model)
# for an exact model the MTTKRP equals A_n times the Hadamard product of the other Grams
g = (model.factors[1].T @ model.factors[1]) * (model.factors[2].T @ model.factors[2])
print("MTTKRP matches A1 G:", np.allclose(mttkrp(x, model.factors, 0), model.factors[0] @ g))
