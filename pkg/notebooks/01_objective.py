# %% [markdown]
# # The unsupervised adaptation objective
#
# A frame-level linear classifier emits logits; the objective sharpens each
# frame's class distribution (entropy term) and discourages probability mass
# being shared between classes across the utterance (class-confusion term).

# %%
import numpy as np

from dsuta.model import ParamSet, forward, greedy_ctc_decode
from dsuta.objective import suta_loss, suta_loss_grad, temperature_softmax

rng = np.random.default_rng(0)
params = ParamSet.random(16, 12, rng, scale=0.5)
x = rng.standard_normal((40, 16))

# %%
lb = suta_loss(params, x)
print(f"entropy {lb.em:.4f}  confusion {lb.mcc:.4f}  total {lb.total:.4f}")
print("decoded tokens:", greedy_ctc_decode(forward(params, x)))

# %% [markdown]
# Temperature flattens the per-frame distributions before either term is computed.

# %%
logits = forward(params, x)
for T in (1.0, 2.5, 10.0):
    P = temperature_softmax(logits, T)
    print(f"T={T:>4}: mean max-probability {P.max(axis=1).mean():.3f}")

# %% [markdown]
# The analytic gradient agrees with central differences.

# %%
_, g = suta_loss_grad(params, x)
h = 1e-6
i, j = 3, 5
bumped = params.copy()
bumped.weight[i, j] += h
up = suta_loss(bumped, x).total
bumped.weight[i, j] -= 2 * h
down = suta_loss(bumped, x).total
print(f"analytic {g.weight[i, j]:.8f}  numeric {(up - down) / (2 * h):.8f}")
