"""Serve a builtin model (weight sidecar JSON) over the adapter protocol."""

import argparse
import sys

from fourier_shapes.adapter import serve
from fourier_shapes.models import load_model


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("weights", help="model sidecar JSON")
    args = ap.parse_args(argv)
    model = load_model(args.weights)

    def handler(header, image):
        if header.get("mode") == "detect":
            r = model.detect(image, header["boxes"])
            return r.loss, r.scores, r.grad
        r = model.classify(image, int(header["target"]))
        return r.nll, r.probs, r.grad

    serve(handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
