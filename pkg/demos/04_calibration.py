# %% [markdown]
# # Recovering the pulse parameters
#
# Only the bare-ramp population (0.76) and the y-field peak (0.94 V/m) are
# known. A coarse grid plus Nelder-Mead finds an ansatz that matches both.
# Takes about 40 s.

# %%
import time

from spinshortcut import PhysicalParams
from spinshortcut.harness import calibrate_ansatz

p = PhysicalParams()
t0 = time.perf_counter()
cal = calibrate_ansatz(p)
print("done in %.0f s" % (time.perf_counter() - t0))
print(cal.ansatz)
print("P1 = %.6f, max|EyD| = %.4f V/m, max|Ex| = %.2f V/m" % (cal.P1_reference, cal.max_EyD, cal.max_Ex))

# %% the result can be saved as a config file for the CLI
print(cal.as_config(p))
