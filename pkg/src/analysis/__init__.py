"""Perturbation, incentive-region, axiom and domination analyses."""
