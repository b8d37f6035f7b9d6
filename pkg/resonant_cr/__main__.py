#!/usr/bin/env python3
"""
resonant-cr entry point for module execution.

This allows the package to be run as a module with:
    python -m resonant_cr run arith --check-brute --q-max 50
    uvx resonant-cr run kernel --delta-identity --L 32
"""

from resonant_cr.main import main

if __name__ == "__main__":
    main()
