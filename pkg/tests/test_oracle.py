"""Exhaustive enumeration checks: counts, exact posterior, TV distance."""

import math

import numpy as np
import pytest

from mcmctrack.errors import DegenerateUpdateError, EnumerationLimitError
from mcmctrack.filters import GaussianTrack, SensorModel
from mcmctrack.hypotheses import (
    CLUTTER,
    AssociationEvent,
    BirthDeathConfig,
    Hypothesis,
    count_associations,
    count_grandchildren,
    log_child_prior,
)
from mcmctrack.likelihoods import ClutterModel, build_matrix, hypothesis_log_likelihood
from mcmctrack.oracle import (
    EnumerationLimit,
    enumerate_child_events,
    enumerate_grandchildren,
    exact_posterior,
    tv_distance,
)


def wide_sensor(p_d=0.9):
    return SensorModel(
        origin=np.zeros(2),
        boresight_angle=0.0,
        fov_half_angle=math.pi,
        r=np.eye(2),
        p_d=p_d,
        max_range=1.0e4,
    )


def hypothesis_with(positions, hid="h0"):
    tracks = tuple(
        GaussianTrack(f"t{i:02d}", np.array([x, y, 0.0, 0.0]), np.diag([4.0, 4.0, 0.1, 0.1]))
        for i, (x, y) in enumerate(positions)
    )
    return Hypothesis(id=hid, parent_id=None, log_weight=0.0, tracks=tracks)


class TestEnumerateGrandchildren:
    @pytest.mark.parametrize("n_objects", [0, 1, 2, 3])
    @pytest.mark.parametrize("n_returns", [0, 1, 2, 3])
    @pytest.mark.parametrize("n_pixels", [0, 1, 2, 3])
    def test_count_matches_formula(self, n_objects, n_returns, n_pixels):
        labels = [f"t{i:02d}" for i in range(n_objects)]
        events = enumerate_grandchildren(labels, n_returns, n_pixels)
        assert len(events) == count_grandchildren(n_objects, n_returns, n_pixels)
        assert len(set(events)) == len(events)

    def test_trivial_empty(self):
        events = enumerate_grandchildren([], 0, 0)
        assert len(events) == 1
        assert events[0].assignments == ()

    def test_hand_checkable_one_one_one(self):
        events = enumerate_grandchildren(["t00"], 1, 1)
        assert len(events) == 8
        keys = {
            (e.birth_pixels, e.deaths, e.assignments) for e in events
        }
        # survivor kept, no birth: z -> {t00, C}
        assert ((), (), ("t00",)) in keys
        assert ((), (), (CLUTTER,)) in keys
        # survivor dead, no birth: z -> C only
        assert ((), ("t00",), (CLUTTER,)) in keys
        # birth in the single pixel, survivor kept: z -> {t00, newborn, C}
        assert ((0,), (), (("b", 0),)) in keys
        assert ((0,), (), ("t00",)) in keys
        assert ((0,), (), (CLUTTER,)) in keys
        # birth plus death: z -> {newborn, C}
        assert ((0,), ("t00",), (("b", 0),)) in keys
        assert ((0,), ("t00",), (CLUTTER,)) in keys

    def test_no_deaths_slice_matches_association_count(self):
        events = enumerate_grandchildren(["t00", "t01"], 1, 0)
        per_death_subset = {}
        for e in events:
            per_death_subset.setdefault(e.deaths, []).append(e)
        assert len(per_death_subset[()]) == count_associations(2, 1) == 3

    def test_limit_enforced(self):
        with pytest.raises(EnumerationLimitError):
            enumerate_grandchildren(
                [f"t{i:02d}" for i in range(3)], 3, 3,
                EnumerationLimit(max_grandchildren=10),
            )
        with pytest.raises(EnumerationLimitError):
            enumerate_grandchildren([f"t{i:02d}" for i in range(9)], 1, 1)


class TestEnumerateChildEvents:
    def test_space_size_no_deaths(self):
        # Assignments with both returns over {t00, B, C} injective on t00,
        # no death candidates.
        events = list(enumerate_child_events(["t00"], 2, []))
        # k=0: 2^2 birth/clutter fills; k=1: 2 slots * 2 fills.
        assert len(events) == 4 + 4
        assert len({e.canonical_key() for e in events}) == len(events)

    def test_deaths_only_over_unassociated_candidates(self):
        events = list(enumerate_child_events(["t00", "t01"], 1, ["t00", "t01"]))
        for e in events:
            assert not (e.deaths & set(e.associated_labels))
        # Death subsets appear for unclaimed objects.
        assert any(len(e.deaths) == 2 for e in events)
        assert any(e.deaths == frozenset({"t01"}) and e.assignments == ("t00",) for e in events)

    def test_zero_returns(self):
        events = list(enumerate_child_events(["t00"], 0, ["t00"]))
        keys = {e.canonical_key() for e in events}
        assert keys == {((), ()), ((), ("t00",))}


class TestExactPosterior:
    def test_certain_association(self):
        # Single track, return at its predicted position, clutter density
        # zero, alpha = beta = 0: the association event takes all the mass.
        sensor = wide_sensor(p_d=1.0)
        parent = hypothesis_with([(100.0, 0.0)])
        returns = np.array([[100.0, 0.0]])
        cfg = BirthDeathConfig(alpha=0.0, beta=0.0, n_pixels=1)
        mat = build_matrix(parent.tracks, returns, sensor, ClutterModel(0.0), cfg)
        post = exact_posterior(parent, mat, cfg, sensor)
        key = AssociationEvent(assignments=("t00",)).canonical_key()
        assert post[key] == pytest.approx(1.0)
        assert sum(post.values()) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_two_track_case(self):
        # Tracks mirror-imaged about the x axis, one return on the axis:
        # the two pairing events must carry equal weight.
        sensor = wide_sensor(p_d=0.9)
        parent = hypothesis_with([(100.0, 50.0), (100.0, -50.0)])
        returns = np.array([[100.0, 0.0]])
        cfg = BirthDeathConfig(alpha=0.01, beta=0.01, n_pixels=2)
        mat = build_matrix(parent.tracks, returns, sensor, ClutterModel(1e-8), cfg)
        post = exact_posterior(parent, mat, cfg, sensor)
        up = AssociationEvent(assignments=("t00",)).canonical_key()
        down = AssociationEvent(assignments=("t01",)).canonical_key()
        assert post[up] == pytest.approx(post[down], rel=1e-9)
        assert sum(post.values()) == pytest.approx(1.0, abs=1e-12)

    def test_generic_weights_sum_to_one(self):
        rng = np.random.default_rng(17)
        sensor = wide_sensor(p_d=0.85)
        parent = hypothesis_with([(100.0, 20.0), (80.0, -30.0)])
        returns = rng.normal(size=(2, 2)) * 30.0 + np.array([90.0, 0.0])
        cfg = BirthDeathConfig(alpha=0.05, beta=0.05, n_pixels=2)
        mat = build_matrix(parent.tracks, returns, sensor, ClutterModel(1e-6), cfg)
        post = exact_posterior(parent, mat, cfg, sensor)
        assert sum(post.values()) == pytest.approx(1.0, abs=1e-12)

    def test_matches_production_scoring(self):
        # The independent composition must agree with the production
        # child_prior * likelihood scoring on every event.
        sensor = wide_sensor(p_d=0.8)
        parent = hypothesis_with([(120.0, 10.0), (90.0, -40.0)])
        returns = np.array([[118.0, 12.0], [60.0, 70.0]])
        cfg = BirthDeathConfig(alpha=0.02, beta=0.03, n_pixels=3)
        mat = build_matrix(parent.tracks, returns, sensor, ClutterModel(1e-7), cfg)
        post = exact_posterior(parent, mat, cfg, sensor)
        scores = {}
        for event in enumerate_child_events(parent.labels, 2, mat.death_candidate_labels()):
            s = log_child_prior(event, parent, cfg, sensor.p_d, 2) + hypothesis_log_likelihood(
                event, mat
            )
            scores[event.canonical_key()] = s
        top = max(scores.values())
        total = sum(math.exp(v - top) for v in scores.values())
        for key, value in post.items():
            expected = math.exp(scores[key] - top) / total
            assert value == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_permutation_covariance(self):
        sensor = wide_sensor(p_d=0.9)
        pos = [(100.0, 30.0), (70.0, -50.0)]
        returns = np.array([[95.0, 25.0], [72.0, -45.0]])
        cfg = BirthDeathConfig(alpha=0.02, beta=0.02, n_pixels=1)
        parent_a = hypothesis_with(pos)
        parent_b = hypothesis_with(pos[::-1])  # labels swapped over positions
        mat_a = build_matrix(parent_a.tracks, returns, sensor, ClutterModel(1e-7), cfg)
        mat_b = build_matrix(parent_b.tracks, returns, sensor, ClutterModel(1e-7), cfg)
        post_a = exact_posterior(parent_a, mat_a, cfg, sensor)
        post_b = exact_posterior(parent_b, mat_b, cfg, sensor)
        swap = {"t00": "t01", "t01": "t00"}

        def relabel(key):
            assignments, deaths = key
            return (
                tuple(swap.get(a, a) for a in assignments),
                tuple(sorted(swap.get(d, d) for d in deaths)),
            )

        for key, value in post_a.items():
            assert post_b[relabel(key)] == pytest.approx(value, rel=1e-9, abs=1e-300)

    def test_all_zero_mass_degenerate(self):
        sensor = wide_sensor(p_d=1.0)
        parent = hypothesis_with([(100.0, 0.0)])
        # Return far enough that the Gaussian underflows to 0, clutter zero,
        # births zero: nothing can explain the return.
        returns = np.array([[100.0, 9000.0]])
        cfg = BirthDeathConfig(alpha=0.0, beta=0.0, n_pixels=1)
        mat = build_matrix(parent.tracks, returns, sensor, ClutterModel(0.0), cfg)
        with pytest.raises(DegenerateUpdateError):
            exact_posterior(parent, mat, cfg, sensor)


class TestTvDistance:
    def test_identical(self):
        p = {"a": 0.5, "b": 0.5}
        assert tv_distance(p, dict(p)) == 0.0

    def test_disjoint(self):
        assert tv_distance({"a": 1.0}, {"b": 1.0}) == 1.0

    def test_arithmetic(self):
        assert tv_distance({"a": 0.6, "b": 0.4}, {"a": 0.5, "b": 0.5}) == pytest.approx(0.1)
