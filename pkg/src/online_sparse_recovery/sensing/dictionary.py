from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from online_sparse_recovery.errors import DimensionMismatchError
from online_sparse_recovery.linalg.kernels import as_dense_vector


@dataclass(frozen=True, eq=False)
class Dictionary:
    """
    Orthonormal 2-D DCT-II basis for side×side patches.

    ``atoms`` is n×n with n = side²; column u·side + v is the basis image
    (u, v) flattened row-major, so a patch z and its coefficients x relate by
    z = atoms·x and x = atomsᵀ·z.
    """
    side: int
    atoms: np.ndarray

    @property
    def n(self) -> int:
        return self.side * self.side

    def synthesize(self, x) -> np.ndarray:
        """Pixel patch(es) D·x; accepts one vector or a stack of row vectors."""
        coefficients = np.asarray(x, dtype=np.float64)
        if coefficients.shape[-1] != self.n:
            raise DimensionMismatchError(f"coefficients have dimension {coefficients.shape[-1]}, expected {self.n}")
        return coefficients @ self.atoms.T

    def analyze(self, z) -> np.ndarray:
        """Coefficients Dᵀ·z; accepts one vector or a stack of row vectors."""
        pixels = np.asarray(z, dtype=np.float64)
        if pixels.shape[-1] != self.n:
            raise DimensionMismatchError(f"patch has dimension {pixels.shape[-1]}, expected {self.n}")
        return pixels @ self.atoms


def dct_matrix(side: int) -> np.ndarray:
    """1-D orthonormal DCT-II matrix C with C[u, i] = α(u)·cos(π(2i+1)u/(2·side))."""
    return dct(np.eye(side), type=2, norm="ortho", axis=0)


@lru_cache(maxsize=None)
def dct2d_dictionary(side: int) -> Dictionary:
    """
    Build the orthonormal 2-D DCT dictionary for side×side patches.

    Atom (u, v) at pixel (i, j) is C[u, i]·C[v, j]; atoms are ordered by
    (u, v) row-major and pixels by (i, j) row-major. The returned atoms are
    read-only so cached dictionaries can be shared between threads.
    """
    if side < 1:
        raise ValueError(f"side must be at least 1, got {side}")
    C = dct_matrix(side)
    atoms = np.kron(C.T, C.T)
    atoms.flags.writeable = False
    return Dictionary(side=side, atoms=atoms)


def sensing_vector(c, D: Dictionary) -> np.ndarray:
    """Pull a pixel-space mask back into coefficient space, a = Dᵀ·c."""
    c = as_dense_vector(c, "c")
    if c.shape[0] != D.n:
        raise DimensionMismatchError(f"mask has dimension {c.shape[0]}, dictionary expects {D.n}")
    return D.atoms.T @ c
