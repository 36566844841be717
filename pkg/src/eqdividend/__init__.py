"""Time-consistent (equilibrium) dividend strategies under non-exponential discounting."""
