"""labrisk: cancer risk assessment from routine laboratory panels.

VAE-based risk ensembles with likelihood-ratio reporting, Shapley
explanations, and comorbidity analysis, driven by a calibrated synthetic
EHR cohort generator.
"""

__version__ = "0.1.0"
