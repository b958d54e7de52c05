"""Ornstein-Uhlenbeck exploration noise: recurrence and stationary spread.

value <- value + theta * (mean - value) + sigma * N(0, 1), dt = 1.
The stationary standard deviation of this recurrence is
sigma / sqrt(2*theta - theta^2); a long simulation should match it.
"""

import numpy as np

from commnav import agents

theta, sigma = 0.15, 0.2
state = agents.ou_init(1, theta, sigma)
rng = np.random.default_rng(0)

n = 100_000
samples = np.empty(n)
for t in range(n):
    value, state = agents.ou_sample(state, rng)
    samples[t] = value[0]

analytic = sigma / np.sqrt(2 * theta - theta**2)
measured = samples[1000:].std()
print(f"theta={theta} sigma={sigma}")
print(f"analytic stationary std: {analytic:.5f}")
print(f"measured over {n} samples: {measured:.5f} ({abs(measured-analytic)/analytic:.2%} off)")

# the deterministic part decays toward the mean
state = agents.OUNoiseState(np.array([1.0]), theta=theta, sigma=0.0)
trail = []
for _ in range(10):
    value, state = agents.ou_sample(state, rng)
    trail.append(float(value[0]))
print("\nnoise-free decay from 1.0:", " ".join(f"{v:.3f}" for v in trail))

# lag-1 autocorrelation of the stationary process is 1 - theta
ac = np.corrcoef(samples[1000:-1], samples[1001:])[0, 1]
print(f"\nlag-1 autocorrelation: measured {ac:.4f}, recurrence predicts {1-theta:.4f}")
