"""Order-3 tensor container, norms, padding and Z-order flattening."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ShapeError


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


class Tensor3:
    """Immutable M x N x L complex tensor indexed ``(i, j, k)``.

    Entries are always stored as complex128; ``is_real`` records whether
    the tensor was built from real data (every imaginary part is zero).
    """

    __slots__ = ("_data", "is_real")

    def __init__(self, data, is_real: bool | None = None):
        arr = np.array(data, dtype=np.complex128, copy=True)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeError(f"expected a non-empty order-3 array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        arr.setflags(write=False)
        self._data = arr
        if is_real is None:
            is_real = bool(np.all(arr.imag == 0))
        elif is_real and np.any(arr.imag != 0):
            raise ValueError("is_real=True but some entries have an imaginary part")
        self.is_real = bool(is_real)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dims(self) -> tuple[int, int, int]:
        return self._data.shape  # type: ignore[return-value]

    def __getitem__(self, idx):
        return self._data[idx]

    def __repr__(self) -> str:
        m, n, l = self.dims
        return f"Tensor3({m}x{n}x{l}, real={self.is_real}, norm={frobenius_norm(self):.6g})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Tensor3) and np.array_equal(self._data, other._data)

    __hash__ = None  # type: ignore[assignment]

    def normalize(self) -> "Tensor3":
        nrm = frobenius_norm(self)
        if nrm == 0:
            raise ValueError("cannot normalize the zero tensor")
        return Tensor3(self._data / nrm, is_real=self.is_real)

    def scaled(self, factor) -> "Tensor3":
        return Tensor3(self._data * factor, is_real=self.is_real and np.isreal(factor))


def face(t: Tensor3, k: int) -> np.ndarray:
    """k-th face ``A^(k)`` as an M x N matrix."""
    l = t.dims[2]
    if not 0 <= k < l:
        raise IndexError(f"face index {k} out of range for L={l}")
    return t.data[:, :, k].copy()


def tube(t: Tensor3, i: int, j: int) -> np.ndarray:
    """(i, j)-th tube as a length-L vector."""
    m, n, _ = t.dims
    if not (0 <= i < m and 0 <= j < n):
        raise IndexError(f"tube index ({i}, {j}) out of range for dims {t.dims}")
    return t.data[i, j, :].copy()


def frobenius_norm(t: Tensor3) -> float:
    return float(np.sqrt(np.sum(np.abs(t.data) ** 2)))


def slice_norm_j(t: Tensor3, j: int) -> float:
    """Frobenius norm of the lateral slice ``A[:, j, :]``."""
    if not 0 <= j < t.dims[1]:
        raise IndexError(f"slice index j={j} out of range")
    return float(np.sqrt(np.sum(np.abs(t.data[:, j, :]) ** 2)))


def slice_norm_i(t: Tensor3, i: int) -> float:
    """Frobenius norm of the horizontal slice ``A[i, :, :]``."""
    if not 0 <= i < t.dims[0]:
        raise IndexError(f"slice index i={i} out of range")
    return float(np.sqrt(np.sum(np.abs(t.data[i, :, :]) ** 2)))


def slice_norms_j(t: Tensor3) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(t.data) ** 2, axis=(0, 2)))


def slice_norms_i(t: Tensor3) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(t.data) ** 2, axis=(1, 2)))


def pad_pow2(t: Tensor3, square: bool = False) -> Tensor3:
    """Zero-pad every axis up to the next power of two.

    With ``square=True`` the first two axes are padded to a common size, as
    the variational routine needs 2^n x 2^n faces.
    """
    m, n, l = t.dims
    mm, nn, ll = next_pow2(m), next_pow2(n), next_pow2(l)
    if square:
        mm = nn = max(mm, nn)
    if (mm, nn, ll) == (m, n, l):
        return t
    out = np.zeros((mm, nn, ll), dtype=np.complex128)
    out[:m, :n, :l] = t.data
    return Tensor3(out, is_real=t.is_real)


# Z-order: basis index bits read c_{n-1} r_{n-1} ... c_0 r_0 (column bit
# first in each pair). This is the order under which the block-encoding
# circuit applies A rather than A^T; see variational.block_encode_apply.

def _interleave(r: int, c: int, nbits: int) -> int:
    b = 0
    for p in range(nbits - 1, -1, -1):
        b = (b << 1) | ((c >> p) & 1)
        b = (b << 1) | ((r >> p) & 1)
    return b


def zorder_permutation(nbits: int) -> np.ndarray:
    """``perm[r * 2^n + c]`` is the Z-order position of entry (r, c)."""
    size = 1 << nbits
    perm = np.empty(size * size, dtype=np.int64)
    for r in range(size):
        for c in range(size):
            perm[r * size + c] = _interleave(r, c, nbits)
    return perm


def zorder_flatten(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not _is_pow2(m.shape[0]):
        raise ShapeError(f"Z-order flattening needs a 2^n x 2^n matrix, got {m.shape}")
    nbits = m.shape[0].bit_length() - 1
    out = np.empty(m.size, dtype=np.complex128)
    out[zorder_permutation(nbits)] = m.reshape(-1)
    return out


def zorder_unflatten(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    size = int(round(np.sqrt(v.size)))
    if size * size != v.size or not _is_pow2(size):
        raise ShapeError(f"vector of length {v.size} is not a flattened 2^n x 2^n matrix")
    nbits = size.bit_length() - 1
    return v[zorder_permutation(nbits)].reshape(size, size)


def flatten_tensor(t: Tensor3) -> np.ndarray:
    """Unit-norm concatenation of the Z-order flattened faces, k = 0..L-1."""
    m, n, l = t.dims
    if m != n or not _is_pow2(m) or not _is_pow2(l):
        raise ShapeError(f"flatten_tensor needs 2^n x 2^n x 2^l dims, got {t.dims}")
    v = np.concatenate([zorder_flatten(t.data[:, :, k]) for k in range(l)])
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("cannot flatten the zero tensor into a state")
    return v / nrm


def to_json(t: Tensor3) -> dict:
    flat = t.data.reshape(-1)
    return {
        "dims": list(t.dims),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def from_json(obj: dict) -> Tensor3:
    try:
        dims = [int(x) for x in obj["dims"]]
        entries = obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError("tensor JSON needs 'dims' and 'entries'") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise ShapeError(f"dims must be three positive integers, got {dims}")
    expected = dims[0] * dims[1] * dims[2]
    if len(entries) != expected:
        raise ShapeError(f"expected {expected} entries for dims {dims}, got {len(entries)}")
    arr = np.array([complex(e[0], e[1]) for e in entries], dtype=np.complex128)
    return Tensor3(arr.reshape(dims))


def load_tensor(path) -> Tensor3:
    return from_json(json.loads(Path(path).read_text()))


def save_tensor(t: Tensor3, path) -> None:
    Path(path).write_text(json.dumps(to_json(t)))
