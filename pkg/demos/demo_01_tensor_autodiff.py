"""Tour of the tensor core: eager ops, the gradient tape, and verification.

Run:  python demos/demo_01_tensor_autodiff.py
"""

import numpy as np

from memlab import tensor as T
from memlab.tensor import GradTape, Tensor, backward, finite_difference_check

print("== forward ops ==")
x = Tensor(np.array([[0.0, 1.0, -2.0, 10.0]]), dtype=np.float64)
print("gelu      :", T.gelu(x).data.round(6))
print("softmax   :", T.softmax(x, -1).data.round(6))

print("\n== reverse-mode gradients ==")
w = Tensor(np.random.default_rng(0).normal(size=(4, 3)), requires_grad=True,
           dtype=np.float64)
with GradTape() as tape:
    h = T.gelu(T.matmul(x, w))
    loss = T.cross_entropy(h, np.array([2]))
backward(loss, tape)
print("loss      :", float(loss.data))
print("dloss/dw  :\n", w.grad.round(4))

print("\n== verification against central differences ==")
probe = Tensor(w.data.copy(), dtype=np.float64)
err = finite_difference_check(
    lambda t: T.cross_entropy(T.gelu(T.matmul(x, t)), np.array([2])), probe)
print(f"max relative error vs finite differences: {err:.2e} (contract: < 1e-4)")

print("\n== gradient accumulation is additive ==")
v = Tensor(np.ones(3), requires_grad=True, dtype=np.float64)
with GradTape() as tape:
    y = T.add(T.tsum(v), T.tsum(v))  # v consumed twice
backward(y, tape)
print("grad of doubly-consumed tensor:", v.grad, "(= 1 + 1 per element)")
