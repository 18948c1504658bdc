"""Word-embedding spaces in the word2vec text format.

An :class:`EmbeddingSpace` pairs an ordered vocabulary with a dense ``n x d``
float64 matrix, row ``i`` holding the vector of token ``i``.  Spaces are
immutable once constructed (the matrix is copied and write-locked), so they
can be shared between retrieval indexes and training loops without defensive
copies.

File format::

    <n> <d>
    <token> <v1> ... <vd>     (one row per token)

Vectors are written with 17 significant digits, which makes a save/load
round trip bit-exact for float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "EmbeddingFormatError",
    "OOVError",
    "Vocabulary",
    "EmbeddingSpace",
    "load_word2vec_text",
    "save_word2vec_text",
    "normalize_rows",
]

# 17 significant decimal digits identify a float64 uniquely.
_FLOAT_FORMAT = ".17g"


class EmbeddingFormatError(ValueError):
    """An embedding file violates the word2vec text format."""


class OOVError(KeyError):
    """A token is not present in the vocabulary."""


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, duplicate-free token list with O(1) token -> position lookup.

    Tokens must be non-empty and contain no whitespace, otherwise they could
    not survive a round trip through the whitespace-delimited text format.
    """

    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        index: dict[str, int] = {}
        for position, token in enumerate(self.tokens):
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"token {token!r} is empty or contains whitespace")
            if token in index:
                raise ValueError(f"duplicate token {token!r}")
            index[token] = position
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def position(self, token: str) -> int:
        """Row index of ``token``; raises :class:`OOVError` when absent."""
        try:
            return self._index[token]
        except KeyError:
            raise OOVError(token) from None


@dataclass(frozen=True, eq=False)
class EmbeddingSpace:
    """A vocabulary plus its row-per-token vector matrix.

    The matrix is coerced to float64, copied, checked for finiteness and
    write-locked; ``len(space)`` is the vocabulary size and ``space.dim``
    the vector width.
    """

    vocab: Vocabulary
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64, order="C")
        if matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got {matrix.ndim}-D")
        if matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"matrix has {matrix.shape[0]} rows for {len(self.vocab)} tokens"
            )
        if matrix.shape[1] < 1:
            raise ValueError("vector dimension must be >= 1")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("matrix contains non-finite entries")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)

    def lookup(self, token: str) -> np.ndarray:
        """Vector of ``token`` (read-only view); raises :class:`OOVError`."""
        return self.matrix[self.vocab.position(token)]


def load_word2vec_text(path) -> EmbeddingSpace:
    """Parse a word2vec text file into an :class:`EmbeddingSpace`.

    Raises :class:`EmbeddingFormatError` with a line number for malformed
    headers, wrong row widths, non-numeric or non-finite values, duplicate
    tokens, and row-count mismatches.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline()
        if not header.strip():
            raise EmbeddingFormatError("empty file, expected '<n> <d>' header")
        parts = header.split()
        if len(parts) != 2:
            raise EmbeddingFormatError(
                f"malformed header {header.strip()!r}, expected '<n> <d>'"
            )
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise EmbeddingFormatError(
                f"non-integer header {header.strip()!r}"
            ) from None
        if count < 0:
            raise EmbeddingFormatError(f"negative row count {count} in header")
        if dim < 1:
            raise EmbeddingFormatError(f"dimension must be >= 1, header says {dim}")

        tokens: list[str] = []
        seen: set[str] = set()
        matrix = np.empty((count, dim), dtype=np.float64)
        filled = 0
        for lineno, line in enumerate(handle, start=2):
            fields = line.split()
            if not fields:
                raise EmbeddingFormatError(f"blank row at line {lineno}")
            if filled >= count:
                raise EmbeddingFormatError(
                    f"more rows than the declared {count} at line {lineno}"
                )
            width = len(fields) - 1
            if width != dim:
                raise EmbeddingFormatError(f"row width {width} ≠ {dim} at line {lineno}")
            token = fields[0]
            if token in seen:
                raise EmbeddingFormatError(f"duplicate token {token!r} at line {lineno}")
            seen.add(token)
            try:
                row = [float(field) for field in fields[1:]]
            except ValueError:
                raise EmbeddingFormatError(
                    f"non-numeric value at line {lineno}"
                ) from None
            vector = np.array(row, dtype=np.float64)
            if not np.all(np.isfinite(vector)):
                raise EmbeddingFormatError(f"non-finite value at line {lineno}")
            matrix[filled] = vector
            tokens.append(token)
            filled += 1
        if filled != count:
            raise EmbeddingFormatError(
                f"header declared {count} rows, file has {filled}"
            )
    return EmbeddingSpace(Vocabulary(tuple(tokens)), matrix)


def save_word2vec_text(space: EmbeddingSpace, path) -> None:
    """Write ``space`` in the word2vec text format (bit-exact round trip)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{len(space)} {space.dim}\n")
        for token, row in zip(space.vocab.tokens, space.matrix):
            rendered = " ".join(format(value, _FLOAT_FORMAT) for value in row)
            handle.write(f"{token} {rendered}\n")


_NORM_TOLERANCE = 1e-12


def normalize_rows(space: EmbeddingSpace) -> tuple[EmbeddingSpace, list[str]]:
    """Scale rows to unit L2 norm (within 1e-12); zero rows are kept and warned.

    Rows already within the tolerance are left bit-for-bit untouched, and a
    fresh division lands well inside it, so the operation is exactly
    idempotent: normalizing a normalized space reproduces the matrix bits.

    Edge behavior at the float64 range limits: a row whose squared norm
    overflows raises, and a row whose squared norm underflows all the way to
    zero is treated as a zero row (warned, kept).
    """
    out = np.array(space.matrix, dtype=np.float64)
    warnings: list[str] = []
    for position in range(out.shape[0]):
        row = out[position]
        norm_sq = float(np.dot(row, row))
        if norm_sq == 0.0:
            warnings.append(space.vocab.tokens[position])
            continue
        if not math.isfinite(norm_sq):
            token = space.vocab.tokens[position]
            raise ValueError(f"squared norm of row {token!r} overflows")
        out[position] = _unit_row(row, norm_sq)
    return EmbeddingSpace(space.vocab, out), warnings


def _unit_row(row: np.ndarray, norm_sq: float) -> np.ndarray:
    # Divide until the computed norm sits within the tolerance of 1.  One
    # division suffices except when the squared norm lost precision in the
    # subnormal range; the exit test depends only on the current bits, so
    # every returned row re-enters through the no-op branch.
    current = row
    for _ in range(4):
        norm = math.sqrt(norm_sq)
        if abs(norm - 1.0) <= _NORM_TOLERANCE:
            return current
        current = current / norm
        norm_sq = float(np.dot(current, current))
    raise ValueError("row normalization did not converge")  # pragma: no cover
