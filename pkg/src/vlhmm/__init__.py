"""Two-step inference for noise-contaminated variable-length Markov chains."""
