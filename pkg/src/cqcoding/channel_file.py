"""Reading and writing channel files.

A channel file is UTF-8 JSON::

    {
      "alphabet": ["0", "1"],
      "dim": 2,
      "channels": {"0": {"0": M, "1": M}, "1": {...}},
      "kraus": [M, ...],
      "damping_x": 0.9
    }

``channels`` maps a channel-state label to one matrix per alphabet symbol.
A matrix ``M`` is a row-major list of rows of ``[re, im]`` pairs; a flat list
of ``dim * dim`` pairs is accepted too. ``kraus`` (optional) holds the Kraus
operators of a quantum channel and may replace ``channels``; ``damping_x``
marks a file generated from the damping family so the parameter can be
changed on the command line.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .avcq import Avcq
from .channels import CqChannel
from .operators import density_matrix
from .zero_error import KrausChannel

FIXTURES = ("noiseless", "swap-pair", "compound-pair", "avcq-pair", "counterexample-cq", "counterexample-kraus", "pentagon")


class ChannelFileError(ValueError):
    """Malformed channel file; the message starts with the offending path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ChannelFile:
    alphabet: tuple
    dim: int
    states: tuple
    channels: tuple
    kraus: KrausChannel | None = None
    damping_x: float | None = None

    @property
    def avcq(self) -> Avcq:
        if not self.channels:
            raise ChannelFileError("channels", "file defines no cq-channels")
        return Avcq(self.channels, self.states)


def parse_state(obj, dim: int, path: str) -> np.ndarray:
    """Parse a matrix and validate it as a density matrix, reporting ``path`` on failure."""
    m = parse_matrix(obj, dim, path)
    try:
        return density_matrix(m)
    except ValueError as exc:
        raise ChannelFileError(path, str(exc)) from None


def parse_matrix(obj, dim: int | None, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ChannelFileError(path, "matrix must be a non-empty list")
    try:
        if _is_pair(obj[0]):
            flat = [_pair(v, f"{path}[{i}]") for i, v in enumerate(obj)]
            if dim is None or len(flat) != dim * dim:
                raise ChannelFileError(path, f"flat matrix needs {dim}x{dim} entries, got {len(flat)}")
            return np.array(flat).reshape(dim, dim)
        rows = [[_pair(v, f"{path}[{r}][{c}]") for c, v in enumerate(row)] for r, row in enumerate(obj)]
    except TypeError:
        raise ChannelFileError(path, "rows must be lists of [re, im] pairs") from None
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ChannelFileError(path, "ragged matrix rows")
    m = np.array(rows)
    if dim is not None and m.shape != (dim, dim):
        raise ChannelFileError(path, f"expected {dim}x{dim}, got {m.shape[0]}x{m.shape[1]}")
    return m


def _is_pair(v) -> bool:
    return isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v)


def _pair(v, path: str) -> complex:
    if not _is_pair(v):
        raise ChannelFileError(path, "entry must be an [re, im] pair of numbers")
    return complex(float(v[0]), float(v[1]))


def parse_channel_file(doc: dict) -> ChannelFile:
    if not isinstance(doc, dict):
        raise ChannelFileError("$", "top level must be an object")
    dim = doc.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise ChannelFileError("dim", "must be a positive integer")
    alphabet = doc.get("alphabet", [])
    if not isinstance(alphabet, list) or not all(isinstance(a, str) for a in alphabet):
        raise ChannelFileError("alphabet", "must be a list of strings")
    if len(set(alphabet)) != len(alphabet):
        raise ChannelFileError("alphabet", "symbols must be distinct")

    states, channels = [], []
    raw = doc.get("channels", {})
    if not isinstance(raw, dict):
        raise ChannelFileError("channels", "must map state labels to channels")
    if raw and not alphabet:
        raise ChannelFileError("alphabet", "required when channels are given")
    for label, chan in raw.items():
        base = f"channels.{label}"
        if not isinstance(chan, dict):
            raise ChannelFileError(base, "must map symbols to matrices")
        missing = [a for a in alphabet if a not in chan]
        extra = [a for a in chan if a not in alphabet]
        if missing or extra:
            raise ChannelFileError(base, f"symbols missing {missing} or unknown {extra}")
        outs = [parse_state(chan[a], dim, f"{base}.{a}") for a in alphabet]
        try:
            channels.append(CqChannel(tuple(alphabet), tuple(outs)))
        except ValueError as exc:
            raise ChannelFileError(base, str(exc)) from None
        states.append(str(label))

    kraus = None
    if "kraus" in doc:
        ops_raw = doc["kraus"]
        if not isinstance(ops_raw, list) or not ops_raw:
            raise ChannelFileError("kraus", "must be a non-empty list of matrices")
        ops = [parse_matrix(m, None, f"kraus[{i}]") for i, m in enumerate(ops_raw)]
        if any(o.shape[1] != dim for o in ops):
            raise ChannelFileError("kraus", f"operators must have {dim} columns")
        try:
            kraus = KrausChannel(tuple(ops))
        except ValueError as exc:
            raise ChannelFileError("kraus", str(exc)) from None
    if not channels and kraus is None:
        raise ChannelFileError("$", "file defines neither channels nor kraus operators")
    x = doc.get("damping_x")
    if x is not None and not isinstance(x, (int, float)):
        raise ChannelFileError("damping_x", "must be a number")
    return ChannelFile(tuple(alphabet), dim, tuple(states), tuple(channels), kraus, None if x is None else float(x))


def load_channel_file(path) -> ChannelFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ChannelFileError(str(path), exc.strerror or "cannot read file") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChannelFileError(str(path), f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_channel_file(doc)


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def channel_file_document(
    channels=(), states=None, alphabet=None, kraus: KrausChannel | None = None, damping_x: float | None = None
) -> dict:
    channels = list(channels)
    doc: dict = {}
    if channels:
        alphabet = list(alphabet or channels[0].alphabet)
        states = list(states or [str(s) for s in range(len(channels))])
        doc["alphabet"] = alphabet
        doc["dim"] = channels[0].dim
        doc["channels"] = {
            s: {a: matrix_to_json(out) for a, out in zip(alphabet, ch.outputs)} for s, ch in zip(states, channels)
        }
    if kraus is not None:
        doc.setdefault("alphabet", [])
        doc["dim"] = kraus.d_in
        doc["kraus"] = [matrix_to_json(a) for a in kraus.kraus_ops]
    if damping_x is not None:
        doc["damping_x"] = damping_x
    return doc


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise ChannelFileError(name, f"unknown fixture; choose from {', '.join(FIXTURES)}")
    return Path(str(resources.files("cqcoding").joinpath("fixtures", f"{name}.json")))


def load_fixture(name: str) -> ChannelFile:
    return load_channel_file(fixture_path(name))


def dumps_channel_file(doc: dict) -> str:
    """JSON text with one matrix row per line."""
    text = json.dumps(doc, indent=2)
    # collapse [re, im] pairs, then rows of pairs
    text = re.sub(r"\[\s+(-?[\d.e+-]+),\s+(-?[\d.e+-]+)\s+\]", r"[\1, \2]", text)
    text = re.sub(r"\[\s+((?:\[-?[\d.e+-]+, -?[\d.e+-]+\],?\s+)+)\]", lambda m: "[" + ", ".join(re.findall(r"\[[^\[\]]+\]", m.group(1))) + "]", text)
    return text + "\n"
