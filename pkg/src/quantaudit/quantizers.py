"""Post-training quantizers: pure maps on flattened parameter vectors.

Nine kinds are supported: sign (1-bit), ternary at a configurable sparsity
level (the fraction of smallest-magnitude weights zeroed), uniform q-bit
grids for q in {2..5}, and identity (no quantization).  Every map also has
a row-wise batch form used to quantize a whole stack of checkpoints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DegenerateInputError, InvalidSpecError

KIND_SIGN = "sign"
KIND_TERNARY = "ternary"
KIND_UNIFORM = "uniform_bits"
KIND_IDENTITY = "identity"
ALLOWED_BITS = (2, 3, 4, 5)


@dataclass(frozen=True)
class QuantizerSpec:
    """One quantization function plus its hyperparameters."""

    kind: str
    sparsity: Optional[float] = None
    bits: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in (KIND_SIGN, KIND_TERNARY, KIND_UNIFORM, KIND_IDENTITY):
            raise InvalidSpecError(f"unknown quantizer kind {self.kind!r}")
        if self.kind == KIND_TERNARY:
            if self.sparsity is None or not 0 <= self.sparsity < 1:
                raise InvalidSpecError("ternary quantizer needs sparsity in [0, 1)")
        elif self.sparsity is not None:
            raise InvalidSpecError(f"sparsity is only valid for ternary, not {self.kind}")
        if self.kind == KIND_UNIFORM:
            if self.bits not in ALLOWED_BITS:
                raise InvalidSpecError(f"bits must be one of {ALLOWED_BITS}")
        elif self.bits is not None:
            raise InvalidSpecError(f"bits is only valid for uniform_bits, not {self.kind}")

    @property
    def display_name(self) -> str:
        """Canonical name used in reports: 'Sign', '1.58b 50%', '3 bits', ..."""
        if self.kind == KIND_SIGN:
            return "Sign"
        if self.kind == KIND_TERNARY:
            return f"1.58b {round(self.sparsity * 100)}%"
        if self.kind == KIND_UNIFORM:
            return f"{self.bits} bits"
        return "Identity"

    def to_dict(self) -> dict:
        doc = {"kind": self.kind}
        if self.sparsity is not None:
            doc["sparsity"] = self.sparsity
        if self.bits is not None:
            doc["bits"] = self.bits
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantizerSpec":
        return cls(kind=doc["kind"], sparsity=doc.get("sparsity"), bits=doc.get("bits"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "QuantizerSpec":
        return cls.from_dict(json.loads(text))

    def transform(self, theta: np.ndarray) -> np.ndarray:
        """Quantize a parameter vector; returns the quantized values."""
        return quantize(theta, self).values


@dataclass
class QuantizedParams:
    """A quantized parameter vector plus the spec that produced it."""

    values: np.ndarray
    source_spec: QuantizerSpec


SIGN = QuantizerSpec(kind=KIND_SIGN)
IDENTITY = QuantizerSpec(kind=KIND_IDENTITY)

# The eight quantizers evaluated in the experiments, plus identity.
PAPER_QUANTIZERS = (
    SIGN,
    QuantizerSpec(kind=KIND_TERNARY, sparsity=0.33),
    QuantizerSpec(kind=KIND_TERNARY, sparsity=0.50),
    QuantizerSpec(kind=KIND_TERNARY, sparsity=0.90),
    QuantizerSpec(kind=KIND_UNIFORM, bits=2),
    QuantizerSpec(kind=KIND_UNIFORM, bits=3),
    QuantizerSpec(kind=KIND_UNIFORM, bits=4),
    QuantizerSpec(kind=KIND_UNIFORM, bits=5),
)


def _as_matrix(theta: np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.asarray(theta, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise InvalidSpecError("theta must be a vector or a stack of row vectors")


def _signs(values: np.ndarray) -> np.ndarray:
    # sign(0) := +1 so the map is total.
    return np.where(values >= 0, 1.0, -1.0)


def sign_rows(theta: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1, row-wise on a checkpoint stack."""
    mat, squeeze = _as_matrix(theta)
    out = _signs(mat)
    return out[0] if squeeze else out


def ternary_rows(theta: np.ndarray, sparsity: float) -> np.ndarray:
    """Zero the floor(sparsity * len) smallest-magnitude entries of each row,
    map the rest to their sign.  Magnitude ties break toward lower index."""
    if not 0 <= sparsity < 1:
        raise InvalidSpecError("sparsity must lie in [0, 1)")
    mat, squeeze = _as_matrix(theta)
    out = _signs(mat)
    n_zero = int(np.floor(sparsity * mat.shape[1]))
    if n_zero > 0:
        order = np.argsort(np.abs(mat), axis=1, kind="stable")
        np.put_along_axis(out, order[:, :n_zero], 0.0, axis=1)
    return out[0] if squeeze else out


def uniform_bits_rows(theta: np.ndarray, q: int) -> np.ndarray:
    """q-bit uniform grid: sign(t) * (a / 2^(q-1)) * int(1 + clip(2^(q-1)|t|/a, 0, 2^(q-1)))
    with a = 2^round(log2(max |t|)) computed per row; int truncates toward zero."""
    if q not in ALLOWED_BITS:
        raise InvalidSpecError(f"bits must be one of {ALLOWED_BITS}")
    mat, squeeze = _as_matrix(theta)
    maxabs = np.max(np.abs(mat), axis=1)
    if np.any(maxabs == 0.0):
        raise DegenerateInputError("all-zero parameter vector: grid scale undefined")
    levels = float(2 ** (q - 1))
    # np.round is round-half-to-even, matching the scale rule.
    alpha = np.exp2(np.round(np.log2(maxabs)))[:, None]
    scaled = np.clip(levels * np.abs(mat) / alpha, 0.0, levels)
    mags = np.trunc(1.0 + scaled)
    out = _signs(mat) * (alpha / levels) * mags
    return out[0] if squeeze else out


def quantize_sign(theta: np.ndarray) -> QuantizedParams:
    """1-bit quantization: every weight to its sign."""
    return QuantizedParams(values=sign_rows(np.atleast_1d(theta)), source_spec=SIGN)


def quantize_ternary(theta: np.ndarray, sparsity: float) -> QuantizedParams:
    """1.58-bit quantization at the given sparsity level."""
    spec = QuantizerSpec(kind=KIND_TERNARY, sparsity=sparsity)
    return QuantizedParams(values=ternary_rows(np.atleast_1d(theta), sparsity),
                           source_spec=spec)


def quantize_uniform_bits(theta: np.ndarray, q: int) -> QuantizedParams:
    """Uniform q-bit quantization with a power-of-two global scale."""
    spec = QuantizerSpec(kind=KIND_UNIFORM, bits=q)
    return QuantizedParams(values=uniform_bits_rows(np.atleast_1d(theta), q),
                           source_spec=spec)


def quantize(theta: np.ndarray, spec: QuantizerSpec) -> QuantizedParams:
    """Dispatch on the spec kind; identity returns the input values unchanged."""
    if spec.kind == KIND_SIGN:
        return quantize_sign(theta)
    if spec.kind == KIND_TERNARY:
        return quantize_ternary(theta, spec.sparsity)
    if spec.kind == KIND_UNIFORM:
        return quantize_uniform_bits(theta, spec.bits)
    values = np.array(np.atleast_1d(theta), dtype=np.float64, copy=True)
    return QuantizedParams(values=values, source_spec=spec)


def quantize_rows(theta: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """Row-wise batch quantization of a (checkpoints x params) matrix."""
    if spec.kind == KIND_SIGN:
        return sign_rows(theta)
    if spec.kind == KIND_TERNARY:
        return ternary_rows(theta, spec.sparsity)
    if spec.kind == KIND_UNIFORM:
        return uniform_bits_rows(theta, spec.bits)
    return np.array(theta, dtype=np.float64, copy=True)
