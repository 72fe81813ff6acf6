# %% [markdown]
# # Dynamic reset
#
# After every reset the detector spends K samples building a reference:
# it snapshots the meta-parameters halfway through and fits a Gaussian to
# the loss improvement index (LII) of the remaining samples. Afterwards,
# every M samples it z-tests the buffer-averaged LII and resets after P
# consecutive exceedances.

# %%
import numpy as np

from dsuta import presets
from dsuta.harness import RunConfig, run_seed

cfg = presets.run_config("dsuta", "stationary", {"variant": "dynamic", "K": 100, "P": 2}, seeds=(0,))
cfg["stream"] = presets.stationary(2000, shift_at=600)
res = run_seed(RunConfig.from_dict(cfg), 0)
print("resets at", [r["t"] for r in res.records if r["reset_fired"]])

# %%
zs = [(r["t"], r["z"]) for r in res.records if r["z"] is not None]
for t, z in zs:
    if 560 <= t <= 640:
        print(f"t={t:>4}  z={z:+.2f}")

# %% [markdown]
# Separation of in-domain and out-of-domain samples under several candidate
# indicators (standardized mean difference of window-averaged scores).

# %%
from dsuta.indicators import separation_experiment

res = separation_experiment(seed=0)
for k, v in res.gaps.items():
    print(f"{k:<16} {v:.2f}")
