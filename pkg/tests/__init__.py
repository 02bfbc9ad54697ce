# Tests for knockoff-lab
