"""Shot records shared by the samplers, the mitigation stack and the analysis code."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .model import kink_count


def _bits_to_hex(row: np.ndarray) -> str:
    n = len(row)
    value = int("".join("1" if b else "0" for b in row), 2) if n else 0
    width = (n + 3) // 4
    return format(value, f"0{width}x")


def _hex_to_bits(text: str, n: int) -> np.ndarray:
    value = int(text, 16)
    return np.array([(value >> (n - 1 - q)) & 1 for q in range(n)], dtype=np.uint8)


@dataclass
class BitstringBatch:
    """Measurement outcomes, one row per shot.

    ``bits`` are stored after undoing the readout-twirl flips (``flip_mask``
    has already been XOR-ed in). ``counts`` lets one row stand for several
    identical shots, which is how posterior resamples are represented.
    """

    bits: np.ndarray
    twirl_id: np.ndarray
    flip_mask: np.ndarray
    basis: str = "X"
    counts: Optional[np.ndarray] = None
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise ValueError("bits must have shape (shots, N)")
        S = self.bits.shape[0]
        self.twirl_id = np.broadcast_to(np.asarray(self.twirl_id, dtype=np.int64), (S,)).copy()
        self.flip_mask = np.broadcast_to(np.asarray(self.flip_mask, dtype=np.uint8), self.bits.shape).copy()
        if self.counts is not None:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (S,) or np.any(self.counts < 0):
                raise ValueError("counts must be a non-negative vector, one per row")

    @classmethod
    def from_bits(cls, bits, basis="X", counts=None, twirl_id=0, flip_mask=0, **header) -> "BitstringBatch":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim == 1:
            bits = bits[None, :]
        return cls(bits, twirl_id, flip_mask, basis, counts, dict(header))

    @classmethod
    def from_counts(cls, counts: dict, basis="X") -> "BitstringBatch":
        """Build from a mapping ``"0101" -> count``."""
        keys = list(counts)
        bits = np.array([[1 if c == "1" else 0 for c in k] for k in keys], dtype=np.uint8)
        return cls(bits, 0, 0, basis, np.array([counts[k] for k in keys]))

    @property
    def n_qubits(self) -> int:
        return self.bits.shape[1]

    @property
    def n_rows(self) -> int:
        return self.bits.shape[0]

    @property
    def weights(self) -> np.ndarray:
        if self.counts is None:
            return np.ones(self.n_rows)
        return self.counts.astype(float)

    @property
    def shots(self) -> int:
        return int(self.n_rows if self.counts is None else self.counts.sum())

    def kink_counts(self) -> np.ndarray:
        return kink_count(self.bits)

    def to_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        w = self.counts if self.counts is not None else np.ones(self.n_rows, dtype=np.int64)
        for row, c in zip(self.bits, w):
            key = "".join("1" if b else "0" for b in row)
            out[key] = out.get(key, 0) + int(c)
        return out

    def select(self, mask) -> "BitstringBatch":
        c = None if self.counts is None else self.counts[mask]
        return BitstringBatch(self.bits[mask], self.twirl_id[mask], self.flip_mask[mask], self.basis, c, dict(self.header))

    @staticmethod
    def concat(batches: Iterable["BitstringBatch"]) -> "BitstringBatch":
        batches = list(batches)
        if not batches:
            raise ValueError("nothing to concatenate")
        if len({b.basis for b in batches}) != 1:
            raise ValueError("cannot pool batches measured in different bases")
        counts = None
        if any(b.counts is not None for b in batches):
            counts = np.concatenate([b.counts if b.counts is not None else np.ones(b.n_rows, np.int64) for b in batches])
        return BitstringBatch(
            np.concatenate([b.bits for b in batches]),
            np.concatenate([b.twirl_id for b in batches]),
            np.concatenate([b.flip_mask for b in batches]),
            batches[0].basis,
            counts,
            dict(batches[0].header),
        )

    # -- text format: header lines "# key value", then "bits twirl_id flip_mask" in hex

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"# n_qubits {self.n_qubits}\n# basis {self.basis}\n")
        for key, value in self.header.items():
            buf.write(f"# {key} {value}\n")
        for i in range(self.n_rows):
            line = f"{_bits_to_hex(self.bits[i])} {int(self.twirl_id[i])} {_bits_to_hex(self.flip_mask[i])}"
            if self.counts is not None:
                line += f" {int(self.counts[i])}"
            buf.write(line + "\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "BitstringBatch":
        header: dict[str, str] = {}
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                header[key] = value
            else:
                rows.append(line.split())
        n = int(header.pop("n_qubits"))
        basis = header.pop("basis", "X")
        bits = np.array([_hex_to_bits(r[0], n) for r in rows], dtype=np.uint8).reshape(len(rows), n)
        twirl = np.array([int(r[1]) for r in rows], dtype=np.int64)
        masks = np.array([_hex_to_bits(r[2], n) for r in rows], dtype=np.uint8).reshape(len(rows), n)
        counts = None
        if rows and len(rows[0]) > 3:
            counts = np.array([int(r[3]) for r in rows], dtype=np.int64)
        return cls(bits, twirl, masks, basis, counts, header)
