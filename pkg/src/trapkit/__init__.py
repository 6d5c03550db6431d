"""trapkit: segmented linear Paul trap modeling and trapped-ion
experiment analysis.

Subpackages and modules:

* ``trap_model`` / ``fields``: stability, secular frequencies, power
  dissipation, trajectories, Monte-Carlo trap depth, field maps.
* ``ion_chain``: equilibrium positions, normal modes, Lamb-Dicke
  parameters, equispaced-chain potential optimization.
* ``quantum_dynamics``: truncated-Fock Lindblad evolution, motional
  Ramsey and echo, thermal Rabi flops, Molmer-Sorensen dynamics.
* ``analysis``: thermometry, heating-rate and noise conversions, Allan
  deviation, lineshape tracking, micromotion inversion, SPAM-corrected
  maximum-likelihood parity fits.
* ``cli``: batch scenario runner (``trapkit <subcommand> --config ...``).
"""

from .constants import YB171, YB172, IonSpecies

__version__ = "0.1.0"

__all__ = ["IonSpecies", "YB171", "YB172", "__version__"]
