# %% [markdown]
# # Non-continual, continual and fast-slow adaptation
#
# `SUTA` adapts from the source parameters on every sample and forgets.
# `CSUTA` never forgets. `DSUTA` keeps slow meta-parameters that are
# updated every M samples from the buffered utterances; each prediction
# comes from N fast steps starting at the current meta-parameters.

# %%
from dsuta import presets
from dsuta.harness import RunConfig, compare_report, format_table, run_experiment

reports = []
for method in ("source", "suta", "csuta", "dsuta"):
    cfg = presets.run_config(method, "md-hard", seeds=(0,))
    reports.append(run_experiment(RunConfig.from_dict(cfg)))
comparison = compare_report(reports)
print(format_table(comparison))

# %% [markdown]
# Error difference against the source model, smoothed over 100 samples.
# Negative values mean the method beats the source model at that point.

# %%
for name, curve in comparison["curves"].items():
    print(f"{name:<8}", " ".join(f"{v:+.3f}" for v in curve[99::250]))
