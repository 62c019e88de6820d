"""Subprocess model adapters over a length-prefixed stdin/stdout protocol.

Frame: ``u32`` little-endian body length, then the body, which is one JSON
header line terminated by ``\\n`` followed by a raw little-endian float32
payload (possibly empty).  Images travel as ``H*W*C`` float32 values in
row-major ``(H, W, C)`` order, gradients likewise.

Conversation::

    -> {"op": "hello", "version": 1}
    <- {"op": "hello", "version": 1}
    -> {"op": "forward_backward", "mode": "classify", "h": H, "w": W, "ch": C, "target": t} + image
    <- {"loss": L, "scores": [...], "grad_shape": [H, W, C]} + dL/dimage
    -> {"op": "shutdown"}

For ``"mode": "detect"`` the request carries ``"boxes": [[cx, cy, w, h], ...]``
instead of ``"target"``; ``scores`` are per-box objectness values and ``loss``
is ``sum -log(1 - o_j)``.  An adapter may answer any request with
``{"error": "..."}``.
"""

from __future__ import annotations

import json
import os
import selectors
import struct
import subprocess
import sys
import time

import numpy as np

from .models import ClassifyResult, DetectResult, detection_loss

PROTOCOL_VERSION = 1
_LEN = struct.Struct("<I")
MAX_FRAME = 1 << 30


class AdapterError(RuntimeError):
    code = 20


class HandshakeError(AdapterError):
    code = 21


class VersionMismatchError(HandshakeError):
    code = 22


class AdapterTimeoutError(AdapterError):
    code = 23


class ShapeMismatchError(AdapterError):
    code = 24


class NonFinitePayloadError(AdapterError):
    code = 25


class TransportError(AdapterError):
    code = 26


class ProtocolError(AdapterError):
    code = 27


class RemoteError(AdapterError):
    code = 28


def encode_frame(header: dict, payload: bytes | np.ndarray = b"") -> bytes:
    if isinstance(payload, np.ndarray):
        payload = np.ascontiguousarray(payload, dtype="<f4").tobytes()
    body = json.dumps(header, separators=(",", ":")).encode() + b"\n" + payload
    return _LEN.pack(len(body)) + body


def decode_body(body: bytes):
    """Split a frame body into ``(header, float32 payload array)``."""
    nl = body.find(b"\n")
    if nl < 0:
        raise ProtocolError("frame body has no header line terminator")
    try:
        header = json.loads(body[:nl])
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ProtocolError(f"malformed header: {e}") from e
    if not isinstance(header, dict):
        raise ProtocolError("header must be a JSON object")
    raw = body[nl + 1:]
    if len(raw) % 4:
        raise ProtocolError(f"payload length {len(raw)} is not a multiple of 4")
    return header, np.frombuffer(raw, dtype="<f4")


# -- adapter side -----------------------------------------------------------

def read_frame_blocking(stream):
    head = stream.read(_LEN.size)
    if not head:
        return None
    if len(head) < _LEN.size:
        raise ProtocolError("truncated frame length")
    (n,) = _LEN.unpack(head)
    body = stream.read(n)
    if len(body) < n:
        raise ProtocolError("truncated frame body")
    return decode_body(body)


def serve(handler, stdin=None, stdout=None, ops=None) -> None:
    """Run an adapter loop.

    ``handler(header, image)`` receives each ``forward_backward`` request with
    the payload reshaped to ``(h, w, ch)`` and returns ``(loss, scores, grad)``.
    ``ops`` maps extra op names to ``fn(header, payload) -> (header, payload)``.
    Unknown ops are answered with an error frame.
    """
    ops = ops or {}
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer

    def send(header, payload=b""):
        stdout.write(encode_frame(header, payload))
        stdout.flush()

    while True:
        frame = read_frame_blocking(stdin)
        if frame is None:
            return
        header, payload = frame
        op = header.get("op")
        if op == "hello":
            send({"op": "hello", "version": PROTOCOL_VERSION})
        elif op == "shutdown":
            return
        elif op == "forward_backward":
            try:
                image = payload.reshape(header["h"], header["w"], header["ch"]).astype(np.float64)
                loss, scores, grad = handler(header, image)
            except Exception as e:  # reported to the client, never fatal
                send({"error": f"{type(e).__name__}: {e}"})
                continue
            grad = np.asarray(grad, dtype=np.float64)
            send({"loss": float(loss), "scores": [float(s) for s in scores],
                  "grad_shape": list(grad.shape)}, grad)
        elif op in ops:
            send(*ops[op](header, payload))
        else:
            send({"error": f"unsupported op {op!r}"})


# -- core side --------------------------------------------------------------

class AdapterModel:
    """Client for an external model process.

    ``task`` is ``"classify"`` or ``"detect"``.  The process is started and
    handshaken by :meth:`start` (called lazily on first use).  One request is
    in flight at a time.
    """

    kind = "external-adapter"

    def __init__(self, command, task: str = "classify", timeout: float = 30.0,
                 input_shape=None, env=None):
        if task not in ("classify", "detect"):
            raise ValueError(f"task must be 'classify' or 'detect', got {task!r}")
        self.command = list(command)
        self.task = task
        self.timeout = float(timeout)
        self.input_shape = tuple(input_shape) if input_shape is not None else None
        self.env = env
        self.proc = None
        self._buf = bytearray()
        self._sel = None

    # lifecycle
    def start(self):
        if self.proc is not None:
            return self
        try:
            self.proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                env=self.env, bufsize=0,
            )
        except OSError as e:
            raise TransportError(f"cannot start adapter {self.command}: {e}") from e
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.proc.stdout, selectors.EVENT_READ)
        try:
            self._send({"op": "hello", "version": PROTOCOL_VERSION})
            header, _ = self._recv()
        except AdapterTimeoutError as e:
            self.close()
            raise HandshakeError(f"no handshake reply within {self.timeout}s") from e
        except AdapterError as e:
            self.close()
            raise HandshakeError(f"handshake failed: {e}") from e
        if header.get("op") != "hello" or "version" not in header:
            self.close()
            raise HandshakeError(f"unexpected handshake reply {header}")
        if header["version"] != PROTOCOL_VERSION:
            self.close()
            raise VersionMismatchError(
                f"adapter speaks protocol version {header['version']}, expected {PROTOCOL_VERSION}"
            )
        return self

    def close(self):
        if self.proc is None:
            return
        try:
            if self.proc.poll() is None:
                try:
                    self._send({"op": "shutdown"})
                except AdapterError:
                    pass
                try:
                    self.proc.wait(timeout=1.0)
                except subprocess.TimeoutExpired:
                    self.proc.kill()
                    self.proc.wait()
        finally:
            for f in (self.proc.stdin, self.proc.stdout):
                try:
                    f.close()
                except OSError:
                    pass
            if self._sel is not None:
                self._sel.close()
            self.proc = None
            self._sel = None
            self._buf.clear()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    # transport
    def _send(self, header, payload=b""):
        try:
            self.proc.stdin.write(encode_frame(header, payload))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as e:
            raise TransportError(f"adapter pipe closed: {e}") from e

    def _read_exact(self, n, deadline):
        fd = self.proc.stdout.fileno()
        while len(self._buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0 or not self._sel.select(remaining):
                raise AdapterTimeoutError(f"adapter did not answer within {self.timeout}s")
            chunk = os.read(fd, max(65536, n - len(self._buf)))
            if not chunk:
                code = self.proc.poll()
                raise TransportError(f"adapter exited mid-request (exit status {code})")
            self._buf += chunk
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def _recv(self):
        deadline = time.monotonic() + self.timeout
        (n,) = _LEN.unpack(self._read_exact(_LEN.size, deadline))
        if n > MAX_FRAME:
            raise ProtocolError(f"frame of {n} bytes exceeds limit")
        return decode_body(self._read_exact(n, deadline))

    def request(self, header, payload=b""):
        """One round trip; returns ``(header, float32 payload)``."""
        self.start()
        self._send(header, payload)
        reply, data = self._recv()
        if "error" in reply:
            raise RemoteError(str(reply["error"]))
        return reply, data

    # model interface
    def _forward_backward(self, image, extra):
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3:
            raise ShapeMismatchError(f"images must be (H, W, C), got {image.shape}")
        if self.input_shape is not None and image.shape != self.input_shape:
            raise ShapeMismatchError(f"adapter expects {self.input_shape}, got {image.shape}")
        H, W, C = image.shape
        header = {"op": "forward_backward", "h": H, "w": W, "ch": C, **extra}
        reply, data = self.request(header, image.astype("<f4"))
        for key in ("loss", "scores", "grad_shape"):
            if key not in reply:
                raise ProtocolError(f"response lacks {key!r}")
        if list(reply["grad_shape"]) != [H, W, C] or data.size != H * W * C:
            raise ShapeMismatchError(
                f"gradient shape {reply['grad_shape']} with {data.size} values, expected {[H, W, C]}"
            )
        scores = np.asarray(reply["scores"], dtype=np.float64)
        loss = reply["loss"]
        if not (isinstance(loss, (int, float)) and np.isfinite(loss)
                and np.all(np.isfinite(scores)) and np.all(np.isfinite(data))):
            raise NonFinitePayloadError("adapter returned non-finite loss, scores or gradient")
        return float(loss), scores, data.reshape(H, W, C).astype(np.float64)

    def classify(self, image, target: int) -> ClassifyResult:
        loss, scores, grad = self._forward_backward(image, {"mode": "classify", "target": int(target)})
        return ClassifyResult(scores, loss, grad)

    def detect(self, image, boxes) -> DetectResult:
        from .models import BoundingBox

        boxes = [BoundingBox.from_obj(b).to_list() for b in boxes]
        loss, scores, grad = self._forward_backward(image, {"mode": "detect", "boxes": boxes})
        if scores.size != len(boxes):
            raise ShapeMismatchError(f"{scores.size} scores for {len(boxes)} boxes")
        _, _, clamped = detection_loss(scores)
        return DetectResult(scores, loss, grad, clamped)

    def echo(self, image):
        """Send an image with ``op: echo`` and return the payload the adapter sends back."""
        image = np.asarray(image)
        reply, data = self.request({"op": "echo", "shape": list(image.shape)}, image.astype("<f4"))
        return data.reshape(image.shape)
