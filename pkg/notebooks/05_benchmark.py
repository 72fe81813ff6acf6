# %% [markdown]
# # Reset strategies on the long stream
#
# Fixed-frequency reset throws away useful cross-domain knowledge; the
# dynamic detector resets only when the LII indicates a shift. Runs take a
# few seconds per seed.

# %%
from dsuta import presets
from dsuta.harness import RunConfig, compare_report, format_table, run_experiment

resets = {
    "none": None,
    "fixed": {"variant": "fixed", "freq": 50},
    "dynamic": {"variant": "dynamic", "K": 100, "P": 2},
}
reports = [run_experiment(RunConfig.from_dict(presets.run_config("dsuta", "md-long", r, seeds=(0,))))
           for r in resets.values()]
reports.append(run_experiment(RunConfig.from_dict(presets.run_config("source", "md-long", seeds=(0,)))))
print(format_table(compare_report(reports)))
