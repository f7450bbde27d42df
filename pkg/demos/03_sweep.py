# %% [markdown]
# # Slowing the ramps down
#
# Stretch the protocol by k. The bare ramps approach the adiabatic limit
# and the correction shrinks as 1/k.

# %%
from spinshortcut import PhysicalParams
from spinshortcut.harness import DEFAULT_ANSATZ, sweep_tf

rows = sweep_tf(PhysicalParams(), DEFAULT_ANSATZ, k_values=(1, 2, 4, 7))
for r in rows:
    print({k: round(v, 6) if isinstance(v, float) else v for k, v in r.items()})
