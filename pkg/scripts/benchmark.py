#!/usr/bin/env python3
"""Runs the end-to-end per-frame throughput benchmark (300 frames, 640x576).

Usage:
    python scripts/benchmark.py [--frames N]

Machine-readable stats land on stdout, the human summary on stderr.
"""

from rvv.bench import main

if __name__ == "__main__":
    main()
