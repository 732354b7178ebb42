"""Coalescence times in multi-type supercritical Galton-Watson processes."""
from .model import (Binomial, Constant, Geometric, JointTable, ModelSpec, Poisson, ProductForm,
                    SpectralData, classify, extinction, mean_matrix, pgf_eval, spectral)
from .modelio import load_model

__version__ = "0.1.0"
