"""Compiled stepping kernels (optional; built from the .pyx source)."""
