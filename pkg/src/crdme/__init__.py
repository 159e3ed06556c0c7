"""Convergent reaction-diffusion master equation toolkit."""
