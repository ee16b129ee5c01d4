"""The tensor engine: reverse-mode gradients and the adaptive optimizer.

Everything trainable in this package (aggregators, predictors, mapping
MLPs) runs on these few dense ops.
"""
import numpy as np

from degalign import numerics as nm
from degalign.numerics import Parameter, Tensor

# A tiny regression: fit w to map x -> y under squared error.
rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(16, 4)))
true_w = rng.normal(size=(4, 2))
y = Tensor(x.data @ true_w)

w = Parameter(np.zeros((4, 2)))
for step in range(200):
    residual = nm.sub(nm.matmul(x, w), y)
    loss = nm.sum_sq(residual)
    nm.backward(loss)
    nm.adam_step([w], lr=0.05)
    if step % 50 == 0:
        print(f"step {step:3d}  loss {loss.item():.6f}")
print("recovered w close to truth:", np.allclose(w.data, true_w, atol=1e-3))

# Gradients match central finite differences.
v = Parameter(rng.normal(size=5))
u = Tensor(rng.normal(size=5))
loss = nm.sum_sq(nm.cosine_rows(v, u))
nm.backward(loss)
h = 1e-5
numeric = np.zeros(5)
for i in range(5):
    bumped = v.data.copy()
    bumped[i] += h
    up = float(nm.sum_sq(nm.cosine_rows(Tensor(bumped), u)).data)
    bumped[i] -= 2 * h
    down = float(nm.sum_sq(nm.cosine_rows(Tensor(bumped), u)).data)
    numeric[i] = (up - down) / (2 * h)
print("max |analytic - numeric|:", float(np.abs(v.grad - numeric).max()))

# Checkpoints are named arrays and round-trip bit-exactly.
import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "params.npz"
    nm.save_arrays(path, {"w": w.data})
    restored = nm.load_arrays(path)["w"]
    print("checkpoint bit-identical:", np.array_equal(restored, w.data))
