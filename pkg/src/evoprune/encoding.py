"""Binary chromosomes for the four encodings and their decoding into masks.

Encodings and gene meanings:

* ``neurons`` (layer l): gene i toggles unit i of hidden layer l; a 0 removes
  every input connection of that unit (the mask column goes all-zero).
* ``neurons-both``: the first h1 genes map to layer-1 units, the remaining h2
  genes to layer-2 units.
* ``connections`` (layer l): gene i*D2 + j toggles the single weight (i, j),
  row-major over previous-layer x this-layer.
* ``features``: gene i toggles input feature i; a 0 removes it from the head
  entirely (the layer-1 mask row goes all-zero).

The output layer is never pruned in any mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import HeadArchitecture, SparseMask

_SCHEMES = ("neurons", "neurons-both", "connections", "features")


class EncodingError(ValueError):
    """Chromosome and encoding/architecture disagree."""


@dataclass(frozen=True)
class EncodingKind:
    """Which structural element each gene of a chromosome toggles."""

    scheme: str
    layer: int = 1

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise EncodingError(f"unknown encoding scheme {self.scheme!r}")
        if self.layer < 1:
            raise EncodingError(f"layer index must be >= 1, got {self.layer}")
        if self.scheme in ("neurons-both", "features"):
            object.__setattr__(self, "layer", 1)

    @classmethod
    def neurons(cls, layer: int = 1) -> "EncodingKind":
        return cls("neurons", layer)

    @classmethod
    def neurons_both(cls) -> "EncodingKind":
        return cls("neurons-both")

    @classmethod
    def connections(cls, layer: int = 1) -> "EncodingKind":
        return cls("connections", layer)

    @classmethod
    def feature_selection(cls) -> "EncodingKind":
        return cls("features")

    @property
    def tag(self) -> str:
        if self.scheme == "neurons":
            return f"N{self.layer}"
        if self.scheme == "neurons-both":
            return "NB"
        if self.scheme == "connections":
            return f"C{self.layer}"
        return "FS"

    @classmethod
    def from_tag(cls, tag: str) -> "EncodingKind":
        if tag == "NB":
            return cls.neurons_both()
        if tag == "FS":
            return cls.feature_selection()
        if len(tag) >= 2 and tag[0] in "NC" and tag[1:].isdigit():
            scheme = "neurons" if tag[0] == "N" else "connections"
            return cls(scheme, int(tag[1:]))
        raise EncodingError(f"unknown encoding tag {tag!r}")

    def validate_for(self, arch: HeadArchitecture) -> None:
        if self.scheme == "neurons-both" and len(arch.hidden_sizes) != 2:
            raise EncodingError("both-layer encoding needs a 2-hidden-layer architecture")
        if self.scheme in ("neurons", "connections") and self.layer > len(arch.hidden_sizes):
            raise EncodingError(
                f"encoding targets hidden layer {self.layer} but the architecture has "
                f"{len(arch.hidden_sizes)}"
            )

    def length(self, arch: HeadArchitecture) -> int:
        """Chromosome length this encoding requires for the architecture."""
        self.validate_for(arch)
        if self.scheme == "neurons":
            return arch.hidden_sizes[self.layer - 1]
        if self.scheme == "neurons-both":
            return sum(arch.hidden_sizes)
        if self.scheme == "connections":
            fan_in, fan_out = arch.layer_dims[self.layer - 1]
            return fan_in * fan_out
        return arch.input_dim


@dataclass(frozen=True, eq=False)
class Chromosome:
    """A binary gene vector plus the encoding that gives it meaning.

    ``kind`` may be None for bare bitstrings driven by surrogate fitness
    functions; such chromosomes cannot be decoded into masks.
    """

    genes: np.ndarray
    kind: EncodingKind | None = None

    def __post_init__(self):
        genes = np.ascontiguousarray(self.genes, dtype=np.uint8)
        if genes.ndim != 1 or genes.size < 1:
            raise EncodingError(f"genes must be a non-empty vector, got shape {genes.shape}")
        if not np.isin(genes, (0, 1)).all():
            raise EncodingError("genes must be binary")
        object.__setattr__(self, "genes", genes)

    def __len__(self) -> int:
        return self.genes.size

    def __eq__(self, other):
        if not isinstance(other, Chromosome):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.genes, other.genes)

    @property
    def bitstring(self) -> str:
        return "".join("1" if g else "0" for g in self.genes)

    def to_text(self) -> str:
        """Log/replay form, e.g. ``N1:0110``. Bare chromosomes use tag ``B``."""
        tag = self.kind.tag if self.kind is not None else "B"
        return f"{tag}:{self.bitstring}"

    @classmethod
    def from_text(cls, text: str) -> "Chromosome":
        tag, _, bits = text.strip().partition(":")
        if not bits or set(bits) - {"0", "1"}:
            raise EncodingError(f"malformed chromosome text {text!r}")
        kind = None if tag == "B" else EncodingKind.from_tag(tag)
        return cls(np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"), kind)


def decode(chrom: Chromosome, arch: HeadArchitecture) -> SparseMask:
    """Expand a chromosome into per-layer binary weight masks."""
    kind = chrom.kind
    if kind is None:
        raise EncodingError("cannot decode a bare chromosome (kind is None)")
    expected = kind.length(arch)
    if len(chrom) != expected:
        raise EncodingError(
            f"chromosome length {len(chrom)} does not match {kind.tag} over this "
            f"architecture (expected {expected})"
        )
    masks = [np.ones(dims) for dims in arch.layer_dims]
    genes = chrom.genes.astype(np.float64)
    if kind.scheme == "neurons":
        masks[kind.layer - 1] *= genes[np.newaxis, :]
    elif kind.scheme == "neurons-both":
        h1 = arch.hidden_sizes[0]
        masks[0] *= genes[np.newaxis, :h1]
        masks[1] *= genes[np.newaxis, h1:]
    elif kind.scheme == "connections":
        masks[kind.layer - 1] = genes.reshape(arch.layer_dims[kind.layer - 1])
    else:  # features
        masks[0] *= genes[:, np.newaxis]
    return SparseMask(tuple(masks))


def active_counts(chrom: Chromosome) -> tuple[int, int]:
    """(number of 1-genes, total genes)."""
    return int(chrom.genes.sum()), len(chrom)


def hamming(a: Chromosome, b: Chromosome) -> int:
    """Number of gene positions where the two chromosomes differ."""
    if a.kind != b.kind:
        raise EncodingError(f"cannot compare {a.kind} against {b.kind}")
    if len(a) != len(b):
        raise EncodingError(f"length mismatch: {len(a)} vs {len(b)}")
    return int(np.count_nonzero(a.genes != b.genes))
