# CLI for knockoff-lab
