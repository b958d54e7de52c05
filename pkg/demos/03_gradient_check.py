"""Check the hand-rolled gradients against central finite differences.

The backward pass returns exact reverse-mode gradients of upstream . output
with respect to every weight, bias and the input; here each component is
compared to (f(x+h) - f(x-h)) / 2h on a random three-layer network.
"""

import numpy as np

from commnav import nets

rng = np.random.default_rng(1)
dims = (5, 8, 6, 3)
params = nets.init_params(dims, "sigmoid", 7)
x = rng.uniform(-1, 1, size=5)
upstream = rng.uniform(-1, 1, size=3)
h = 1e-5

grads, dx = nets.backward(params, x, upstream)


def loss(p, xv):
    return float(np.dot(upstream, nets.forward(p, xv)))


worst = 0.0
count = 0
for l in range(len(params.weights)):
    for arr, g in ((params.weights[l], grads.weights[l]), (params.biases[l], grads.biases[l])):
        for idx in np.ndindex(*arr.shape):
            keep = arr[idx]
            arr[idx] = keep + h
            up = loss(params, x)
            arr[idx] = keep - h
            down = loss(params, x)
            arr[idx] = keep
            fd = (up - down) / (2 * h)
            worst = max(worst, abs(g[idx] - fd) / max(1.0, abs(fd)))
            count += 1
for i in range(5):
    xp = x.copy(); xp[i] += h
    xm = x.copy(); xm[i] -= h
    fd = (loss(params, xp) - loss(params, xm)) / (2 * h)
    worst = max(worst, abs(dx[i] - fd) / max(1.0, abs(fd)))
    count += 1

print(f"checked {count} gradient components on a {dims} sigmoid network")
print(f"worst relative deviation from finite differences: {worst:.2e}")

# Adam sanity check: first step moves by -lr * g / (|g| + eps)
p = nets.MLPParams((1, 1), [np.array([[1.0]])], [np.array([0.0])], "relu", "identity")
state = nets.init_adam(p, learning_rate=0.01)
g = nets.MLPGrads([np.array([[0.5]])], [np.array([0.0])])
p2, _ = nets.adam_step(state, p, g)
print(f"\nAdam first step with g=0.5, lr=0.01: delta = {p2.weights[0][0,0] - 1.0:+.6f}")

# soft target update: convex combination
t = nets.init_params((4, 3), "identity", 0)
o = nets.init_params((4, 3), "identity", 1)
mixed = nets.soft_update(t, o, 0.01)
gap_before = float(np.abs(t.weights[0] - o.weights[0]).max())
gap_after = float(np.abs(mixed.weights[0] - o.weights[0]).max())
print(f"soft update tau=0.01 shrinks the target gap: {gap_before:.4f} -> {gap_after:.4f}")
