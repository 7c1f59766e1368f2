"""Qubit state discrimination with one-way LOCC measurements.

Each POVM M turns a state pair into the distributions Tr M(y) rho and
Tr M(y) sigma, so the measurements play the role of channel inputs and the
bounds become envelopes over the measurement family. The family searched is
the projective qubit measurements (Bloch-angle grid plus Nelder-Mead polish)
together with random rank-one POVMs with three and four outcomes.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import minimize
from scipy.special import rel_entr, xlogy

import settings
from divergence_core import Distribution, cumulant_arrays, safe_log
from errors import DistributionError, DomainError, UnsupportedDimensionError
from optimize1d import compact_grid, golden_max, t_to_s

logger = logging.getLogger(__name__)

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
POLISH_OPTIONS = {"xatol": 1e-10, "fatol": 1e-14, "maxiter": 600}
POLISH_TOP = 1
COMMUTE_TOL = 1e-12


@dataclass(frozen=True)
class DensityMatrix:
    dim: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        dim = int(self.dim)
        if entries.shape != (dim, dim):
            raise DistributionError(f"Density matrix has shape {entries.shape}, expected ({dim}, {dim})")
        if np.max(np.abs(entries - entries.conj().T)) > settings.PSD_TOL:
            raise DistributionError("Density matrix is not Hermitian")
        if abs(np.trace(entries) - 1.0) > settings.PSD_TOL:
            raise DistributionError(f"Density matrix has trace {np.trace(entries).real!r}, expected 1")
        if np.min(eigh(entries, eigvals_only=True)) < -settings.PSD_TOL:
            raise DistributionError("Density matrix has a negative eigenvalue")
        entries.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, entries):
        entries = np.asarray(entries, dtype=complex)
        return cls(entries.shape[0], entries)

    @classmethod
    def from_bloch(cls, vector):
        """Qubit state (I + r . sigma) / 2 for a Bloch vector with |r| <= 1."""
        r = np.asarray(vector, dtype=float).reshape(-1)
        if r.size != 3:
            raise DistributionError(f"Bloch vector needs 3 components, got {r.size}")
        if np.linalg.norm(r) > 1.0 + settings.PSD_TOL:
            raise DistributionError(f"Bloch vector {r.tolist()} lies outside the unit ball")
        return cls(2, 0.5 * (np.eye(2) + np.einsum("i,ijk->jk", r, PAULI)))

    def bloch(self):
        if self.dim != 2:
            raise UnsupportedDimensionError(f"Bloch vector needs a qubit, got dim={self.dim}")
        return np.real(np.einsum("ijk,kj->i", PAULI, self.entries))

    def eigenvalues(self):
        return eigh(self.entries, eigvals_only=True)

    def conjugated(self, unitary):
        unitary = np.asarray(unitary, dtype=complex)
        return DensityMatrix(self.dim, unitary @ self.entries @ unitary.conj().T)


@dataclass(frozen=True)
class Povm:
    elements: tuple = field(repr=False)
    family: str = "custom"

    def __post_init__(self):
        elements = [np.array(e, dtype=complex) for e in self.elements]
        if not elements:
            raise DistributionError("POVM needs at least one element")
        dim = elements[0].shape[0]
        for k, e in enumerate(elements):
            if e.shape != (dim, dim) or np.max(np.abs(e - e.conj().T)) > settings.PSD_TOL:
                raise DistributionError(f"POVM element {k} is not a Hermitian {dim}x{dim} matrix")
            if np.min(eigh(e, eigvals_only=True)) < -settings.PSD_TOL:
                raise DistributionError(f"POVM element {k} is not positive semidefinite")
            e.setflags(write=False)
        if np.max(np.abs(sum(elements) - np.eye(dim))) > settings.POVM_TOL:
            raise DistributionError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", tuple(elements))

    @property
    def dim(self):
        return self.elements[0].shape[0]

    @classmethod
    def projective(cls, direction):
        """Two-outcome qubit measurement along a Bloch direction."""
        n = np.asarray(direction, dtype=float).reshape(-1)
        norm = np.linalg.norm(n)
        if n.size != 3 or norm == 0:
            raise DistributionError(f"Invalid measurement direction {n.tolist()}")
        n_sigma = np.einsum("i,ijk->jk", n / norm, PAULI)
        return cls((0.5 * (np.eye(2) + n_sigma), 0.5 * (np.eye(2) - n_sigma)), "projective")

    @classmethod
    def rank_one(cls, vectors, family=None):
        """POVM S^(-1/2) v v^dagger S^(-1/2) built from vectors v_i, S = sum v v^dagger."""
        u = _normalised_vectors(np.asarray(vectors, dtype=complex))
        elements = tuple(np.outer(v, v.conj()) for v in u)
        return cls(elements, family or f"rank1-{len(elements)}")

    def conjugated(self, unitary):
        unitary = np.asarray(unitary, dtype=complex)
        return Povm(tuple(unitary @ e @ unitary.conj().T for e in self.elements), self.family)

    def to_json(self):
        return {
            "family": self.family,
            "elements": [[[[float(z.real), float(z.imag)] for z in row] for row in e] for e in self.elements],
        }


@dataclass(frozen=True)
class LoccBounds:
    r: float
    stein: float
    chernoff: float
    hoeffding: float
    hk: float
    quantum_relative_entropy: float
    best_measurement: Povm
    commuting: bool

    @property
    def gap(self):
        return self.quantum_relative_entropy - self.stein

    def to_json(self):
        return {
            "r": self.r,
            "measured_stein": self.stein,
            "measured_chernoff": self.chernoff,
            "measured_hoeffding": self.hoeffding,
            "measured_hk": self.hk,
            "quantum_relative_entropy": self.quantum_relative_entropy,
            "gap": self.gap,
            "best_measurement": self.best_measurement.to_json(),
            "commuting": self.commuting,
            "lower_bound_only": not self.commuting,
        }


def _normalised_vectors(v):
    """Rows u_i = S^(-1/2) v_i with S = sum_i v_i v_i^dagger."""
    s = np.einsum("ki,kj->ij", v, v.conj())
    vals, vecs = eigh(s)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return v @ inv_sqrt.T


def _check_dims(rho, other):
    if rho.dim != other.dim:
        raise DomainError(f"Dimension mismatch: {rho.dim} vs {other.dim}")


def measure(rho, m):
    """Outcome distribution Tr M(y) rho, labelled by element index."""
    if rho.dim != m.dim:
        raise DomainError(f"State has dim {rho.dim} but the POVM acts on dim {m.dim}")
    probs = np.real(np.einsum("kij,ji->k", np.array(m.elements), rho.entries))
    if np.min(probs) < -settings.MEASURE_NOISE:
        raise DistributionError(f"Negative outcome probability {np.min(probs)!r}")
    probs = np.clip(probs, 0.0, None)
    return Distribution.of(probs / probs.sum())


def quantum_relative_entropy(rho, sigma):
    """Tr rho (log rho - log sigma); +inf unless supp rho lies inside supp sigma."""
    _check_dims(rho, sigma)
    lam = np.clip(rho.eigenvalues(), 0.0, None)
    mu, vecs = eigh(sigma.entries)
    overlap = np.real(np.einsum("ji,jk,ki->i", vecs.conj(), rho.entries, vecs))
    null = mu <= settings.PSD_TOL
    if np.any(overlap[null] > settings.PSD_TOL):
        return np.inf
    keep = ~null
    value = float(np.sum(xlogy(lam, lam)) - np.dot(overlap[keep], np.log(mu[keep])))
    return max(value, 0.0)


def _random_vectors(seed, restart, outcomes, dim):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, restart])))
    return rng.normal(size=(outcomes, dim)) + 1j * rng.normal(size=(outcomes, dim))


class MeasurementFamily:
    """Candidate measurements for a fixed state pair, with their outcome distributions."""

    def __init__(self, rho, sigma, restarts=settings.RANDOM_RESTARTS, seed=0,
                 theta_points=settings.THETA_POINTS, phi_points=settings.PHI_POINTS):
        _check_dims(rho, sigma)
        self.rho, self.sigma = rho, sigma
        self.qubit = rho.dim == 2
        if self.qubit:
            self.r_rho, self.r_sigma = rho.bloch(), sigma.bloch()
            theta = np.linspace(0.0, np.pi, theta_points)
            phi = np.linspace(0.0, 2.0 * np.pi, phi_points, endpoint=False)
            th, ph = np.meshgrid(theta, phi, indexing="ij")
            self.angles = np.stack([th.ravel(), ph.ravel()], axis=1)
            special = [v for v in (self.r_rho, self.r_sigma, self.r_rho - self.r_sigma) if np.linalg.norm(v) > 0]
            self.special = np.array([v / np.linalg.norm(v) for v in special]).reshape(-1, 3)
            self.grid_p, self.grid_q = self._projective_probs(self._directions(self.angles))
            self.special_p, self.special_q = self._projective_probs(self.special)
            outcome_counts = (3, 4)
        else:
            outcome_counts = (rho.dim, rho.dim + 1)
            self.eigenbases = [eigh(rho.entries)[1].T, eigh(sigma.entries)[1].T]
        self.random = {}
        for k, outcomes in enumerate(outcome_counts):
            vectors = np.array([
                _random_vectors(seed, restart, outcomes, rho.dim)
                for restart in range(k, restarts, len(outcome_counts))
            ]).reshape(-1, outcomes, rho.dim)
            p, q = self._rank_one_probs(vectors)
            self.random[outcomes] = (vectors, p, q)

    @staticmethod
    def _directions(angles):
        th, ph = angles[..., 0], angles[..., 1]
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)

    def _projective_probs(self, directions):
        a = np.clip(directions @ self.r_rho, -1.0, 1.0)
        b = np.clip(directions @ self.r_sigma, -1.0, 1.0)
        p = np.stack([(1.0 + a) / 2.0, (1.0 - a) / 2.0], axis=-1)
        q = np.stack([(1.0 + b) / 2.0, (1.0 - b) / 2.0], axis=-1)
        return p, q

    def _rank_one_probs(self, vectors):
        if vectors.shape[0] == 0:
            empty = np.zeros((0, vectors.shape[1]))
            return empty, empty
        u = np.array([_normalised_vectors(v) for v in vectors])
        p = np.real(np.einsum("rki,ij,rkj->rk", u.conj(), self.rho.entries, u))
        q = np.real(np.einsum("rki,ij,rkj->rk", u.conj(), self.sigma.entries, u))
        p = np.clip(p, 0.0, None)
        q = np.clip(q, 0.0, None)
        return p / p.sum(axis=1, keepdims=True), q / q.sum(axis=1, keepdims=True)

    @staticmethod
    def _as_real(v):
        return np.concatenate([v.real.ravel(), v.imag.ravel()])

    @staticmethod
    def _as_complex(x, shape):
        half = x.size // 2
        return (x[:half] + 1j * x[half:]).reshape(shape)

    def _polish_projective(self, score, angles):
        def loss(x):
            p, q = self._projective_probs(self._directions(np.asarray(x)[None, :]))
            value = float(score(p, q)[0])
            return -value if np.isfinite(value) else 1e300

        result = minimize(loss, np.asarray(angles, dtype=float), method="Nelder-Mead", options=POLISH_OPTIONS)
        return -float(result.fun), self._directions(result.x)

    def _polish_rank_one(self, score, vectors):
        shape = vectors.shape

        def loss(x):
            p, q = self._rank_one_probs(self._as_complex(x, shape)[None])
            value = float(score(p, q)[0])
            return -value if np.isfinite(value) else 1e300

        result = minimize(loss, self._as_real(vectors), method="Nelder-Mead", options=POLISH_OPTIONS)
        return -float(result.fun), self._as_complex(result.x, shape)

    def maximize(self, score, polish=True):
        """Largest score(P, Q) over the family and the measurement attaining it.

        score maps stacked outcome distributions (N, k) to N values.
        """
        best_value, best_make = -np.inf, None
        if self.qubit:
            for p, q, directions in ((self.special_p, self.special_q, self.special),
                                     (self.grid_p, self.grid_q, None)):
                if p.shape[0] == 0:
                    continue
                values = score(p, q)
                i = int(np.argmax(values))
                if values[i] > best_value:
                    direction = directions[i] if directions is not None else self._directions(self.angles[i])
                    best_value, best_make = float(values[i]), (lambda d=direction: Povm.projective(d))
            if polish:
                values = score(self.grid_p, self.grid_q)
                i = int(np.argmax(values))
                value, direction = self._polish_projective(score, self.angles[i])
                if value > best_value:
                    best_value, best_make = value, (lambda d=direction: Povm.projective(d))
        else:
            for basis in self.eigenbases:
                p = measure(self.rho, Povm(tuple(np.outer(v, v.conj()) for v in basis), "projective")).probs
                q = measure(self.sigma, Povm(tuple(np.outer(v, v.conj()) for v in basis), "projective")).probs
                value = float(score(p[None], q[None])[0])
                if value > best_value:
                    best_value = value
                    best_make = lambda b=basis: Povm(tuple(np.outer(v, v.conj()) for v in b), "projective")
        for outcomes, (vectors, p, q) in self.random.items():
            if vectors.shape[0] == 0:
                continue
            values = score(p, q)
            order = np.argsort(-values, kind="stable")
            if values[order[0]] > best_value:
                best_value = float(values[order[0]])
                best_make = lambda v=vectors[order[0]]: Povm.rank_one(v)
            if polish:
                for i in order[:POLISH_TOP]:
                    value, v = self._polish_rank_one(score, vectors[i])
                    if value > best_value:
                        best_value, best_make = value, (lambda v=v: Povm.rank_one(v))
        return best_value, best_make()


def divergence_score(p, q):
    with np.errstate(divide="ignore", invalid="ignore"):
        return rel_entr(p, q).sum(axis=-1)


def phi_score(s, sign=1.0):
    def score(p, q):
        return sign * cumulant_arrays(safe_log(p), safe_log(q), s)
    return score


def _certified(rho, sigma):
    _check_dims(rho, sigma)
    if rho.dim != 2:
        raise UnsupportedDimensionError(f"Certified measurement search supports qubits only, got dim={rho.dim}")
    for name, state in (("rho", rho), ("sigma", sigma)):
        if np.min(state.eigenvalues()) < settings.STRICT_POSITIVE:
            raise DomainError(f"{name} must be strictly positive (eigenvalues >= {settings.STRICT_POSITIVE})")


def max_measured_divergence(rho, sigma, restarts=settings.RANDOM_RESTARTS, seed=0,
                            theta_points=settings.THETA_POINTS, phi_points=settings.PHI_POINTS):
    """max over measurements M of D(P^M_rho || P^M_sigma) and the measurement attaining it."""
    _check_dims(rho, sigma)
    if rho.dim != 2:
        logger.warning("dim=%d: searching eigenbases and random rank-one POVMs only (best effort)", rho.dim)
    elif min(np.min(rho.eigenvalues()), np.min(sigma.eigenvalues())) < settings.STRICT_POSITIVE:
        logger.warning("States are not strictly positive; reported maximum is not certified")
    family = MeasurementFamily(rho, sigma, restarts, seed, theta_points, phi_points)
    value, povm = family.maximize(divergence_score)
    return max(value, 0.0), povm


def measured_phi_sup(s, rho, sigma, restarts=settings.RANDOM_RESTARTS, seed=0):
    """max over measurements of phi(s | P^M_rho || P^M_sigma) for s <= 0."""
    s = float(s)
    if s > 0:
        raise DomainError(f"s must be nonpositive, got {s}")
    _certified(rho, sigma)
    if s == 0.0:
        return 0.0
    family = MeasurementFamily(rho, sigma, restarts, seed)
    value, _ = family.maximize(phi_score(s))
    return value


def _sup_over_grid(inner, grid, to_s=None):
    """Coarse grid sup of inner(x, polish=False) refined by golden section with polishing."""
    coarse = np.array([inner(x, polish=False) for x in grid])
    k = int(np.argmax(coarse))
    best_x, best = float(grid[k]), inner(grid[k], polish=True)
    lo, hi = float(grid[max(k - 1, 0)]), float(grid[min(k + 1, len(grid) - 1)])
    if hi > lo:
        x, value = golden_max(lambda v: inner(v, polish=True), lo, hi, tol=1e-12)
        if value > best:
            best_x, best = float(x), value
    return best_x, best


def _measured_hoeffding(r, family, stein, grid_points):
    if r >= stein:
        return 0.0
    if r == 0.0:
        value, _ = family.maximize(lambda p, q: divergence_score(q, p))
        return value

    def inner(s, polish=True):
        s = float(s)
        best, _ = family.maximize(phi_score(s, sign=-1.0), polish=polish)
        return (-s * r + best) / (1.0 - s)

    grid = np.linspace(0.0, 1.0 - settings.S_ENDPOINT_GAP, grid_points)
    _, value = _sup_over_grid(inner, grid)
    return max(value, 0.0)


def _measured_hk(r, family, stein, slope, grid_points):
    if not r > stein:
        return 0.0

    def inner(t, polish=True):
        t = float(t)
        s = float(t_to_s(t))
        best, _ = family.maximize(phi_score(s), polish=polish)
        return (1.0 - t) * (-s * r - best)

    grid = compact_grid(grid_points)
    _, value = _sup_over_grid(inner, grid)
    return max(value, r + slope, 0.0)


def _measured_chernoff(family, grid_points):
    def inner(s, polish=True):
        best, _ = family.maximize(phi_score(float(s), sign=-1.0), polish=polish)
        return best

    _, value = _sup_over_grid(inner, np.linspace(0.0, 1.0, grid_points))
    return max(value, 0.0)


def measured_slope(rho, sigma):
    """min over measurements of lim phi(s)/s: log of the least eigenvalue of sigma relative to rho."""
    vals = eigh(sigma.entries, rho.entries, eigvals_only=True)
    return float(np.log(np.min(vals)))


def locc_bounds(rho, sigma, r, restarts=settings.RANDOM_RESTARTS, seed=0,
                grid_points=settings.QUANTUM_S_GRID):
    """Stein, Chernoff, Hoeffding(r) and Han-Kobayashi(r) for one-way LOCC measurements."""
    r = float(r)
    if r < 0:
        raise DomainError(f"Rate must be nonnegative, got {r!r}")
    _certified(rho, sigma)
    family = MeasurementFamily(rho, sigma, restarts, seed)
    stein, povm = family.maximize(divergence_score)
    stein = max(stein, 0.0)
    commuting = bool(np.max(np.abs(rho.entries @ sigma.entries - sigma.entries @ rho.entries)) <= COMMUTE_TOL)
    bounds = LoccBounds(
        r=r,
        stein=stein,
        chernoff=_measured_chernoff(family, grid_points),
        hoeffding=_measured_hoeffding(r, family, stein, grid_points),
        hk=_measured_hk(r, family, stein, measured_slope(rho, sigma), grid_points),
        quantum_relative_entropy=quantum_relative_entropy(rho, sigma),
        best_measurement=povm,
        commuting=commuting,
    )
    logger.info("LOCC bounds at r=%g: stein=%.9g chernoff=%.9g (family %s)",
                r, bounds.stein, bounds.chernoff, povm.family)
    return bounds
