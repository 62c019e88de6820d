"""Test adapter: ``loss = sum(image) / (H*W)``, gradient ``1/(H*W)`` everywhere.

Also answers ``op: echo`` by returning the received payload unchanged.
``--fault`` injects one failure for protocol tests:

    version    reply to hello with version 999
    garbage    reply to hello with a non-hello header
    silent     never reply to hello
    hang       stall forever on forward_backward
    die        exit without replying on forward_backward
    bad-shape  report a gradient shape that does not match the request
    nan        put a NaN into the gradient
    remote     answer forward_backward with an error frame

``--after N`` delays the forward_backward faults until request N (0-based).
"""

import argparse
import os
import sys
import time

import numpy as np

from fourier_shapes.adapter import PROTOCOL_VERSION, encode_frame, read_frame_blocking

FAULTS = ("none", "version", "garbage", "silent", "hang", "die", "bad-shape", "nan", "remote")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fault", choices=FAULTS, default="none")
    ap.add_argument("--after", type=int, default=0)
    args = ap.parse_args(argv)

    stdin, stdout = sys.stdin.buffer, sys.stdout.buffer

    def send(header, payload=b""):
        stdout.write(encode_frame(header, payload))
        stdout.flush()

    n_requests = 0
    while True:
        frame = read_frame_blocking(stdin)
        if frame is None:
            return 0
        header, payload = frame
        op = header.get("op")
        if op == "hello":
            if args.fault == "version":
                send({"op": "hello", "version": 999})
            elif args.fault == "garbage":
                send({"op": "nope"})
            elif args.fault == "silent":
                time.sleep(3600)
            else:
                send({"op": "hello", "version": PROTOCOL_VERSION})
        elif op == "shutdown":
            return 0
        elif op == "echo":
            send({"op": "echo", "n": int(payload.size)}, payload.tobytes())
        elif op == "forward_backward":
            H, W, C = header["h"], header["w"], header["ch"]
            fault = args.fault if n_requests >= args.after else "none"
            n_requests += 1
            if fault == "hang":
                time.sleep(3600)
            if fault == "die":
                os._exit(3)
            if fault == "remote":
                send({"error": "injected failure"})
                continue
            image = payload.reshape(H, W, C).astype(np.float64)
            loss = image.sum() / (H * W)
            grad = np.full((H, W, C), 1.0 / (H * W))
            shape = [H, W, C]
            if fault == "bad-shape":
                shape = [H + 1, W, C]
            if fault == "nan":
                grad[0, 0, 0] = np.nan
            scores = [loss] if header.get("mode") != "detect" else [0.0] * len(header.get("boxes", []))
            send({"loss": float(loss), "scores": scores, "grad_shape": shape}, grad)
        else:
            send({"error": f"unsupported op {op!r}"})


if __name__ == "__main__":
    sys.exit(main())
