"""Coherent control of the biexciton: Rabi oscillations, Ramsey fringes and echo.

Run with ``python3 demos/pulse_dynamics.py``. Prints tables only.
"""

import math

import numpy as np

from qdtimebin import dynamics as D

# Rabi oscillations: P_b after one Gaussian pulse versus area. A constant
# dephasing damps the oscillation more for long pulses, since the coherence
# has more time to decay while the pulse is on.
areas = np.linspace(0, 6 * math.pi, 13)
deph = D.DephasingModel(constant_rate=0.005)
print("Rabi oscillations (constant dephasing 0.005 / ps)")
print(f"{'area/pi':>8} {'sigma=12ps':>11} {'sigma=48ps':>11}")
short = D.rabi_scan(D.LevelSystem(), 12.0, areas, deph)
long = D.rabi_scan(D.LevelSystem(), 48.0, areas, deph)
for a, ps, pl in zip(areas, short[:, 1], long[:, 1]):
    print(f"{a / math.pi:8.1f} {ps:11.4f} {pl:11.4f}")

# Ramsey: two pi/2 pulses. A static spread of detunings (spectral diffusion)
# washes the fringes out, the echo pulse undoes it.
half = D.Pulse(math.pi / 2, 2.0)
delays = np.array([20.0, 60.0, 120.0, 200.0])
ram = D.ramsey(D.LevelSystem(), (half, half), delays, D.DephasingModel(),
               detuning_std=0.01, n_samples=100, seed=1)
ech = D.echo(D.LevelSystem(), D.echo_template(half, 100.0), delays, D.DephasingModel(),
             detuning_std=0.01, n_samples=100, seed=1)
print("\nFringe visibility with a static detuning spread of 0.01 rad/ps")
print(f"{'delay ps':>9} {'Ramsey':>8} {'echo':>8}")
for t, vr, ve in zip(delays, ram.visibility, ech.visibility):
    print(f"{t:9.0f} {vr:8.4f} {ve:8.4f}")
