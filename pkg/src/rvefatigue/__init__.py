"""Multi-scale fatigue crack growth: atomistic RVE to Paris constants to XFEM life."""

__version__ = "0.1.0"
