"""Kernel-lens tools for zeroth-order optimization.

First-order and ZO-projected empirical NTKs of small MLPs, SPSA-based
ZO-SGD, one-step learning-dynamics decomposition, JL budgets and moment
identities, and the experiment runners built on them.
"""
__version__ = "0.1.0"
