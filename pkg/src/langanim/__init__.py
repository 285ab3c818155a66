"""Language-guided face animation with a recurrent residual motion generator."""
