"""Small feedforward action-value network with hand-written backprop.

Two tanh hidden layers and a linear head with one output per action
(index 0 = awake, 1 = sleep). Parameters live in one flat float64 vector so
that gradient steps, clipping, checkpoints and finite-difference checks all
work on a single array.
"""
from __future__ import annotations

import json
import struct

import numpy as np

N_ACTIONS = 2
AWAKE, SLEEP = 0, 1

CHECKPOINT_MAGIC = b"GCQNET"
CHECKPOINT_VERSION = 1


class TrainingDivergence(FloatingPointError):
    pass


class ValueNet:
    """``q(x) -> (N, 2)`` for an input batch ``x`` of shape ``(N, d_in)``."""

    def __init__(self, d_in: int, hidden=(64, 64), params=None, rng=None):
        self.sizes = (int(d_in), *map(int, hidden), N_ACTIONS)
        self._shapes = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self._shapes += [(a, b), (b,)]
        n = sum(int(np.prod(s)) for s in self._shapes)
        if params is None:
            rng = np.random.default_rng(0) if rng is None else rng
            params = np.empty(n)
            off = 0
            for s in self._shapes:
                k = int(np.prod(s))
                if len(s) == 2:
                    lim = np.sqrt(6.0 / (s[0] + s[1]))
                    params[off:off + k] = rng.uniform(-lim, lim, k)
                else:
                    params[off:off + k] = 0.0
                off += k
        params = np.array(params, dtype=np.float64)
        if params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {params.shape}")
        self.params = params

    @property
    def d_in(self) -> int:
        return self.sizes[0]

    @property
    def hidden(self) -> tuple:
        return self.sizes[1:-1]

    def _views(self, flat):
        out, off = [], 0
        for s in self._shapes:
            k = int(np.prod(s))
            out.append(flat[off:off + k].reshape(s))
            off += k
        return out

    def copy(self) -> "ValueNet":
        return ValueNet(self.d_in, self.hidden, self.params.copy())

    def forward(self, x, cache: bool = False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ValueError(f"input must have shape (N, {self.d_in}), got {x.shape}")
        views = self._views(self.params)
        acts = [x]
        h = x
        n_layers = len(views) // 2
        for layer in range(n_layers):
            w, b = views[2 * layer], views[2 * layer + 1]
            h = h @ w + b
            if layer < n_layers - 1:
                h = np.tanh(h)
                acts.append(h)
        return (h, acts) if cache else h

    __call__ = forward

    def backward(self, acts, d_out) -> np.ndarray:
        """Gradient of the parameters given ``d loss / d q`` of shape ``(N, 2)``."""
        views = self._views(self.params)
        grad = np.zeros_like(self.params)
        gviews = self._views(grad)
        n_layers = len(views) // 2
        delta = d_out
        for layer in range(n_layers - 1, -1, -1):
            a_in = acts[layer]
            gviews[2 * layer][...] = a_in.T @ delta
            gviews[2 * layer + 1][...] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ views[2 * layer].T) * (1.0 - a_in ** 2)
        return grad

    # checkpoint ----------------------------------------------------------

    def to_bytes(self, meta: dict | None = None) -> bytes:
        """``GCQNET`` + uint16 version + uint32 header length (little-endian),
        a UTF-8 JSON header, then the parameters as little-endian float64."""
        header = {"sizes": list(self.sizes), "n_params": int(self.params.size), "dtype": "<f8"}
        if meta:
            header["meta"] = meta
        hb = json.dumps(header, sort_keys=True).encode()
        return (CHECKPOINT_MAGIC + struct.pack("<HI", CHECKPOINT_VERSION, len(hb)) + hb
                + self.params.astype("<f8").tobytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> tuple["ValueNet", dict]:
        if not data.startswith(CHECKPOINT_MAGIC):
            raise ValueError("not a value-network checkpoint (bad magic)")
        off = len(CHECKPOINT_MAGIC)
        if len(data) < off + 6:
            raise ValueError("checkpoint truncated in header")
        version, hlen = struct.unpack_from("<HI", data, off)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        off += 6
        try:
            header = json.loads(data[off:off + hlen].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ValueError(f"corrupt checkpoint header: {e}") from None
        off += hlen
        n = int(header["n_params"])
        if len(data) - off != 8 * n:
            raise ValueError(f"checkpoint holds {(len(data) - off) / 8:g} parameters, header says {n}")
        params = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64)
        sizes = header["sizes"]
        return cls(sizes[0], sizes[1:-1], params), header.get("meta", {})


def regression_loss(net: ValueNet, x, actions, targets):
    """``mean ½ (q(x)[a] - r)²`` and its parameter gradient."""
    q, acts = net.forward(x, cache=True)
    idx = np.arange(q.shape[0])
    diff = q[idx, actions] - targets
    loss = 0.5 * float(np.mean(diff ** 2))
    d = np.zeros_like(q)
    d[idx, actions] = diff / q.shape[0]
    return loss, net.backward(acts, d)


def imitation_loss(net: ValueNet, x, targets):
    """``mean ½ Σ_a (q(x)[a] - target[a])²`` and its parameter gradient."""
    q, acts = net.forward(x, cache=True)
    diff = q - targets
    loss = 0.5 * float(np.mean(np.sum(diff ** 2, axis=1)))
    return loss, net.backward(acts, diff / q.shape[0])


def gradient_step(net: ValueNet, grad, lr: float, clip_norm: float = 5.0) -> float:
    """Plain gradient descent with global-norm clipping. Returns the raw norm."""
    norm = float(np.linalg.norm(grad))
    if not np.isfinite(norm):
        raise TrainingDivergence(f"non-finite gradient norm ({norm})")
    scale = clip_norm / norm if norm > clip_norm else 1.0
    net.params -= lr * scale * grad
    return norm
