# %% [markdown]
# # Synthetic multi-domain streams
#
# Utterances are token sequences expanded into frames around class
# prototypes. A domain is a stack of feature corruptions. The shipped
# presets rotate the feature space: one rotation shared by every domain
# plus one specific to each domain.

# %%
import numpy as np

from dsuta import presets
from dsuta.harness import source_model
from dsuta.metrics import edit_distance
from dsuta.model import forward, greedy_ctc_decode
from dsuta.stream import build_stream, stream_spec_from_config

spec = stream_spec_from_config(presets.md_hard(500), seed=0)
stream = build_stream(spec)
print(len(stream), "utterances; boundaries", sorted(stream.boundaries))
u = stream.utterances[0]
print("first utterance:", u.features.shape, "frames, reference", u.reference)

# %% [markdown]
# The pre-trained model is fit on clean frames. Its error per domain:

# %%
phi_pre = source_model(spec.task)
for cfg in (presets.md_easy(), presets.md_hard()):
    s = build_stream(stream_spec_from_config(cfg, seed=0))
    by_dom = {}
    for u in s.utterances[::10]:
        e = edit_distance(greedy_ctc_decode(forward(phi_pre, u.features)), u.reference)
        acc = by_dom.setdefault(u.domain_id, [0, 0])
        acc[0] += e
        acc[1] += len(u.reference)
    print({k: round(a / b, 3) for k, (a, b) in by_dom.items()})

# %% [markdown]
# The long stream draws a random domain and a random segment length in
# [20, 500] until 10000 samples are reached.

# %%
long_spec = stream_spec_from_config(presets.md_long(), seed=0)
lengths = [n for _, n in long_spec.segments]
print(len(lengths), "segments; min", min(lengths[:-1]), "max", max(lengths), "total", sum(lengths))
