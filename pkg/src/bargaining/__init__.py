"""Feasible sets, disagreement points and the closed-form bargaining solutions."""
