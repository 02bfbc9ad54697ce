# Core library for knockoff-lab
# Orchestrator-agnostic data generation, training, filtering and reporting
