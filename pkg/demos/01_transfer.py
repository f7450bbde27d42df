# %% [markdown]
# # Spin transfer with and without the counter-diabatic term
#
# Two tanh ramps move the singlet-triplet qubit from |1> to |-1> in 2 ns.
# On their own they are too fast, so the state leaks. Adding the y-field
# correction keeps it on the instantaneous eigenstate.

# %%
import numpy as np

from spinshortcut import PhysicalParams, build_drive, field_traces
from spinshortcut.drive import hamiltonian_trace
from spinshortcut.harness import DEFAULT_ANSATZ
from spinshortcut.propagator import instantaneous_eigenstates, overlap_history, propagate

p = PhysicalParams()
a = DEFAULT_ANSATZ
print("Zeeman splitting", p.delta, "meV")

# %%
trace = build_drive(p, a)
print("theta at the ends:", trace.theta[0], trace.theta[-1])
print("max adiabaticity metric:", trace.max_eta)

# %% bare ramps
bare = propagate(hamiltonian_trace(p, a, counterdiabatic=False))
print("P1(t_f) without correction: %.4f" % bare.P1[-1])

# %% with the correction
full = propagate(hamiltonian_trace(p, a))
chi, _, _, _ = instantaneous_eigenstates(trace.Y, trace.Z)
follow = overlap_history(full, chi)
print("P1(t_f) with correction: %.9f" % full.P1[-1])
print("worst overlap with the eigenstate: %.9f" % follow.min())

# %% what it costs in field
f = field_traces(p, trace)
print("peak |Ex| = %.2f V/m, peak |EyD| = %.3f V/m" % (f.max_Ex, f.max_EyD))

# sample a few points of the population curve
for i in np.linspace(0, len(full.t) - 1, 6).astype(int):
    print("t=%.2f  bare %.4f  corrected %.4f" % (full.t[i], bare.P1[i], full.P1[i]))
