"""qfuse: quantum-ensemble intrusion detection.

Two simulated quantum branches (a variational classifier and a
fidelity-kernel SVM) are fused by a random-forest meta-learner over
hard, margin, or probability meta-features, with metric, calibration,
and noise-robustness evaluation built in.
"""

__version__ = "0.1.0"
