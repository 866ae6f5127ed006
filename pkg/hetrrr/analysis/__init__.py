"""
Subgroup-aware reduced-rank regression: fusion ADMM, model selection, simulation.
"""
