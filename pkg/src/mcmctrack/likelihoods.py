"""Data-association matrix construction and hypothesis likelihood evaluation.

The matrix has one row per measurement return plus a death row, and one
column per object plus a birth column and a clutter column. Entries are
stored as log-likelihoods; impossible pairings are -inf. The death row only
drives the MCMC proposal; death probability mass enters through the child
prior, never through the likelihood.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidEventError
from .filters import (
    GaussianTrack,
    SensorModel,
    circular_speed,
    in_bounded_fov,
    in_fov,
    measurement_likelihood,
)
from .hypotheses import (
    BIRTH,
    CLUTTER,
    AssociationEvent,
    BirthDeathConfig,
    Hypothesis,
    log_association_prior,
    _xlogy,
)

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ClutterModel:
    """Uniform spatial clutter: density over the bounded FOV wedge plus a
    Poisson expected count per scan (the count only matters to simulation)."""

    density_value: float
    expected_count: float = 0.0

    def __post_init__(self) -> None:
        if self.density_value < 0.0 or not math.isfinite(self.density_value):
            raise ConfigError("clutter.density_value must be finite and >= 0")
        if self.expected_count < 0.0:
            raise ConfigError("clutter.expected_count must be >= 0")


def uniform_clutter(sensor: SensorModel, expected_count: float = 0.0) -> ClutterModel:
    return ClutterModel(1.0 / sensor.fov_area, expected_count)


@dataclass(frozen=True)
class BirthModel:
    """Newborn-track construction parameters: velocity prior is Gaussian
    around the local circular-orbit velocity (prograde by default)."""

    velocity_std: float = 0.3
    prograde: bool = True

    def __post_init__(self) -> None:
        if self.velocity_std <= 0.0:
            raise ConfigError("birth_model.velocity_std must be > 0")


@dataclass(frozen=True, eq=False)
class AssociationMatrix:
    """(m+1) x (M+2) table of log-likelihoods driving child generation.

    Rows 0..m-1 are measurement returns, row m is the death row. Columns
    0..M-1 are object labels (frame order), column M is birth, column M+1 is
    clutter. Immutable once built.
    """

    log_entries: np.ndarray
    object_labels: tuple[str, ...]
    in_fov_flags: tuple[bool, ...]
    returns: np.ndarray

    def __post_init__(self) -> None:
        m_rows, n_cols = self.log_entries.shape
        if n_cols != len(self.object_labels) + 2:
            raise ValueError("matrix must have one column per object plus birth and clutter")
        if m_rows != len(self.returns) + 1:
            raise ValueError("matrix must have one row per return plus the death row")
        if np.isnan(self.log_entries).any():
            raise ValueError("matrix entries must be finite or -inf")

    @property
    def n_returns(self) -> int:
        return len(self.returns)

    @property
    def n_objects(self) -> int:
        return len(self.object_labels)

    @property
    def birth_col(self) -> int:
        return self.n_objects

    @property
    def clutter_col(self) -> int:
        return self.n_objects + 1

    def column_of(self, entry: str) -> int:
        if entry == BIRTH:
            return self.birth_col
        if entry == CLUTTER:
            return self.clutter_col
        try:
            return self.object_labels.index(entry)
        except ValueError:
            raise InvalidEventError(f"assignment references a missing column {entry!r}")

    def entry_of(self, col: int) -> str:
        if col == self.birth_col:
            return BIRTH
        if col == self.clutter_col:
            return CLUTTER
        return self.object_labels[col]

    def death_candidate_labels(self) -> tuple[str, ...]:
        """Objects eligible to die this scan: predicted inside the FOV."""
        return tuple(
            lbl for lbl, ok in zip(self.object_labels, self.in_fov_flags) if ok
        )

    def to_csv(self, path) -> None:
        """Debug dump: rows are returns plus DEATH, columns labels + B + C."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", *self.object_labels, "B", "C"])
            for i in range(self.n_returns):
                writer.writerow([f"z{i}", *(repr(v) for v in self.log_entries[i])])
            writer.writerow(["DEATH", *(repr(v) for v in self.log_entries[self.n_returns])])


def birth_likelihood(z: np.ndarray, sensor: SensorModel) -> float:
    """Marginal likelihood of a return under the canonical birth pdf:
    uniform position over the bounded FOV wedge, 1/area inside, 0 outside."""
    if not in_bounded_fov(np.asarray(z, dtype=float), sensor):
        return 0.0
    return 1.0 / sensor.fov_area


def build_matrix(
    predicted: Sequence[GaussianTrack],
    returns: np.ndarray,
    sensor: SensorModel,
    clutter: ClutterModel,
    birth_cfg: BirthDeathConfig,
) -> AssociationMatrix:
    """Assemble the data-association matrix from post-prediction tracks and
    the current frame's returns.

    Object columns hold the exact marginal measurement likelihoods (shared
    code path with update_track); the birth column holds birth_likelihood;
    the clutter column holds the clutter density. The death row holds the
    per-object death probability for in-FOV objects (proposal bookkeeping
    only) and -inf elsewhere.
    """
    returns = np.asarray(returns, dtype=float).reshape(-1, 2)
    m = len(returns)
    n_objects = len(predicted)
    log_entries = np.full((m + 1, n_objects + 2), -math.inf)
    for i in range(m):
        z = returns[i]
        for j, track in enumerate(predicted):
            lik = measurement_likelihood(track, z, sensor)
            log_entries[i, j] = math.log(lik) if lik > 0.0 else -math.inf
        b_lik = birth_likelihood(z, sensor)
        log_entries[i, n_objects] = math.log(b_lik) if b_lik > 0.0 else -math.inf
        log_entries[i, n_objects + 1] = (
            math.log(clutter.density_value) if clutter.density_value > 0.0 else -math.inf
        )
    fov_flags = tuple(in_fov(t.mean, sensor) for t in predicted)
    for j, flag in enumerate(fov_flags):
        if flag and birth_cfg.beta > 0.0:
            log_entries[m, j] = math.log(birth_cfg.beta)
    return AssociationMatrix(
        log_entries=log_entries,
        object_labels=tuple(t.label for t in predicted),
        in_fov_flags=fov_flags,
        returns=returns,
    )


def hypothesis_log_likelihood(event: AssociationEvent, matrix: AssociationMatrix) -> float:
    """Log-likelihood of an event: sum of the matrix entries its assignments
    select. Deaths contribute no factor. -inf when any selected entry is 0."""
    if len(event.assignments) != matrix.n_returns:
        raise InvalidEventError(
            f"event has {len(event.assignments)} assignments for "
            f"{matrix.n_returns} returns"
        )
    total = 0.0
    for i, entry in enumerate(event.assignments):
        total += matrix.log_entries[i, matrix.column_of(entry)]
    return total


def newborn_track(
    label: str,
    z: np.ndarray,
    sensor: SensorModel,
    mu: float,
    birth_model: BirthModel,
) -> GaussianTrack:
    """Instantiate a newborn Gaussian from the birth pdf and its associated
    return: position block is one flat-prior EKF update (mean z, covariance
    r), velocity prior is Gaussian around the local circular-orbit velocity."""
    z = np.asarray(z, dtype=float).reshape(2)
    speed = circular_speed(z, mu)
    radius = float(np.linalg.norm(z))
    tangent = np.array([-z[1], z[0]]) / radius
    if not birth_model.prograde:
        tangent = -tangent
    mean = np.array([z[0], z[1], speed * tangent[0], speed * tangent[1]])
    cov = np.zeros((4, 4))
    cov[:2, :2] = sensor.r
    cov[2, 2] = cov[3, 3] = birth_model.velocity_std ** 2
    return GaussianTrack(label, mean, cov)


def compare_likelihood_forms(
    event: AssociationEvent,
    parent: Hypothesis,
    matrix: AssociationMatrix,
    sensor: SensorModel,
) -> tuple[float, float]:
    """Diagnostic pair of child likelihoods for a pure-association event
    (no births or deaths):

    - the mean-evaluated form p_d^k (1-p_d)^(M-k) * prod N(z; h(mean), r),
      which scores each associated return at the track mean and omits the
      association-count normalizer;
    - the marginal form association_prior * prod of matrix entries, which
      integrates over track uncertainty.

    As track covariances shrink to zero the ratio tends to the
    1/(C(m,k) k!) normalizer.
    """
    if event.n_births or event.n_deaths:
        raise InvalidEventError("comparison is defined for pure association events")
    event.validate_against(parent.labels)
    m = matrix.n_returns
    n_objects = len(parent.tracks)
    k = len(event.associated_labels)
    tracks = {t.label: t for t in parent.tracks}
    log_mean_form = _xlogy(k, sensor.p_d) + _xlogy(n_objects - k, 1.0 - sensor.p_d)
    log_marginal = 0.0
    for i, entry in enumerate(event.assignments):
        col = matrix.column_of(entry)
        log_marginal += matrix.log_entries[i, col]
        if entry == CLUTTER:
            log_mean_form += matrix.log_entries[i, col]
        elif entry == BIRTH:
            raise InvalidEventError("comparison is defined for pure association events")
        else:
            log_mean_form += _log_density_at_mean(tracks[entry], matrix.returns[i], sensor)
    log_marginal_form = log_association_prior(n_objects, m, k, sensor.p_d) + log_marginal
    return math.exp(log_mean_form), math.exp(log_marginal_form)


def _log_density_at_mean(track: GaussianTrack, z: np.ndarray, sensor: SensorModel) -> float:
    """log N(z; h(mean), r): measurement density evaluated at the track mean,
    ignoring track covariance."""
    r = sensor.r
    det = r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0]
    inv = np.array([[r[1, 1], -r[0, 1]], [-r[1, 0], r[0, 0]]]) / det
    diff = np.asarray(z, dtype=float) - track.mean[:2]
    maha = float(diff @ inv @ diff)
    return -0.5 * maha - math.log(_TWO_PI * math.sqrt(det))
