# Keeps this directory importable (for the shared `oracles` module) when
# pytest collects from the repository root.
