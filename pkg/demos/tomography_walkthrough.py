"""State tomography of a partially coherent pair state with error bars.

Run with ``python3 demos/tomography_walkthrough.py``.
"""

import numpy as np

from qdtimebin import source as S
from qdtimebin import tomography as T
from qdtimebin.qcore import bell_state

# A pair state whose E/L coherence is reduced to 78% of the ideal value,
# emitted with a pump phase of pi (the Phi- state).
rho = S.realistic_state(S.SourceConfig(coherence_factor=0.78, pump_phase=np.pi))

# 16 analyzer phase settings, 20000 detected pairs each.
records = T.simulate_counts(rho, T.default_settings(), 20_000, seed=1)
print(f"settings: {len(records)}, measurement rank: {T.measurement_rank(records)}")

res = T.reconstruct_mle(records)
print(f"MLE converged={res.converged} after {res.iterations} iterations")
np.set_printoptions(precision=3, suppress=True)
print("reconstructed density matrix (real part):")
print(res.rho_hat.real)

target = bell_state("phi-")
rep = T.entanglement_report(res.rho_hat, target)
boot = T.bootstrap(records, res.rho_hat, target, n_resamples=50, seed=2)
lo_f, hi_f = boot["fidelity_interval"]
lo_c, hi_c = boot["concurrence_interval"]
print(f"fidelity to Phi-: {rep.fidelity:.3f}  [{lo_f:.3f}, {hi_f:.3f}]")
print(f"concurrence:      {rep.concurrence:.3f}  [{lo_c:.3f}, {hi_c:.3f}]")
