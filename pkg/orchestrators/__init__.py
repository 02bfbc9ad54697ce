# Orchestrator implementations
# Each subdirectory runs seeded knockoff trials and reduces them into reports
