"""Work distributions: discrete atoms or Monte Carlo samples."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

__all__ = ['WorkDistribution']

_NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WorkDistribution:
    """P(W) as atoms ``w`` with probabilities ``p``.

    ``delta_f`` is the equilibrium free-energy change of the protocol. When
    built with :meth:`from_samples` every sample is an atom of weight 1/N and
    standard errors are available.
    """
    w: np.ndarray
    p: np.ndarray
    delta_f: float = 0.0
    n_samples: int = None
    moments: tuple = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        p = np.asarray(self.p, dtype=float).ravel()
        if w.shape != p.shape or w.size == 0:
            raise DomainError("atoms and probabilities must be non-empty and matching")
        if np.any(p < -_NORM_TOL):
            raise DomainError("probabilities must be non-negative")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1) > _NORM_TOL * max(1, w.size)**0.5:
            raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, 'w', w)
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'moments', tuple(float(np.dot(p, w**k)) for k in (1, 2, 3)))

    @classmethod
    def from_atoms(cls, w, p, delta_f=0.0, merge_tol=0.0):
        """Atoms sorted by w; atoms closer than ``merge_tol`` are merged."""
        w = np.asarray(w, dtype=float).ravel()
        p = np.asarray(p, dtype=float).ravel()
        order = np.argsort(w, kind='stable')
        w, p = w[order], p[order]
        if w.size > 1:
            starts = np.concatenate([[0], np.flatnonzero(np.diff(w) > merge_tol) + 1])
            p_merged = np.add.reduceat(p, starts)
            weighted = np.add.reduceat(w * p, starts) / np.where(p_merged > 0, p_merged, 1)
            w = np.where(p_merged > 0, weighted, w[starts])
            p = p_merged
        return cls(w, p, delta_f)

    @classmethod
    def from_samples(cls, samples, delta_f=0.0):
        samples = np.asarray(samples, dtype=float).ravel()
        n = samples.size
        return cls(samples, np.full(n, 1.0 / n), delta_f, n_samples=n)

    def moment(self, k):
        return float(np.dot(self.p, self.w**k))

    @property
    def mean(self):
        return self.moments[0]

    def central_moments(self):
        """(mean, variance, third central moment)."""
        mu = self.mean
        d = self.w - mu
        return mu, float(np.dot(self.p, d * d)), float(np.dot(self.p, d**3))

    def cumulants(self):
        """Cumulants of the dissipated work W - delta_f."""
        mu, var, third = self.central_moments()
        return mu - self.delta_f, var, third

    def moment_stderr(self):
        """Standard errors of the first three raw moments (sampled data only)."""
        if self.n_samples is None:
            raise DomainError("standard errors need sampled data")
        n = self.n_samples
        return tuple(float(np.std(self.w**k, ddof=1) / math.sqrt(n)) for k in (1, 2, 3))

    def log_jarzynski(self, beta):
        """ln(<e^{-beta W}> e^{beta delta_f}), safe for large |beta W|."""
        mask = self.p > 0
        return float(logsumexp(-beta * self.w[mask], b=self.p[mask]) + beta * self.delta_f)

    def jarzynski(self, beta):
        """<e^{-beta W}> e^{beta delta_f}; 1 for an equilibrium start."""
        return math.exp(self.log_jarzynski(beta))

    def jarzynski_stderr(self, beta):
        if self.n_samples is None:
            raise DomainError("standard errors need sampled data")
        shift = beta * self.w.min()
        x = np.exp(-beta * self.w + shift)
        return float(np.std(x, ddof=1) / math.sqrt(self.n_samples)
                     * math.exp(beta * self.delta_f - shift))

    def support(self):
        mask = self.p > 0
        return float(self.w[mask].min()), float(self.w[mask].max())
