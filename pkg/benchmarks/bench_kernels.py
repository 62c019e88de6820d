"""Compiled vs numpy winding kernels; see ``fourier-shapes bench --help``."""

import sys

from fourier_shapes.bench import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
