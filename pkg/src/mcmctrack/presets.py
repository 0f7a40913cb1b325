"""Shipped scenario presets and per-preset tracker tuning.

All presets use an Earth-centered sensor wedge (thirty-degree total field of
view) watching circular orbits at tens of thousands of km, with one breakup
event that scatters fragments through the field of view.
"""

from __future__ import annotations

import math

import numpy as np

from .filters import MU_EARTH, DynamicsConfig, SensorModel
from .likelihoods import uniform_clutter
from .simulate import ScenarioConfig, SpawnEvent

_SCAN_S = 300.0


def _circular_state(radius_km: float, angle_deg: float, mu: float = MU_EARTH) -> np.ndarray:
    theta = math.radians(angle_deg)
    speed = math.sqrt(mu / radius_km)
    return np.array(
        [
            radius_km * math.cos(theta),
            radius_km * math.sin(theta),
            -speed * math.sin(theta),
            speed * math.cos(theta),
        ]
    )


def _sensor(p_d: float) -> SensorModel:
    return SensorModel(
        origin=np.zeros(2),
        boresight_angle=0.0,
        fov_half_angle=math.pi / 12.0,  # thirty degrees total
        r=np.eye(2),
        p_d=p_d,
        max_range=5.0e4,
    )


def preset_single_spawn(seed: int = 0) -> ScenarioConfig:
    """One object crossing the field of view breaks into three fragments."""
    sensor = _sensor(p_d=0.97)
    return ScenarioConfig(
        objects=[_circular_state(35000.0, -10.0)],
        sensor=sensor,
        clutter=uniform_clutter(sensor, expected_count=0.4),
        dynamics=DynamicsConfig(mu=MU_EARTH, dt=_SCAN_S, q=1e-9, integrator_substeps=16),
        duration=14 * _SCAN_S,
        scan_interval=_SCAN_S,
        spawn_events=[
            SpawnEvent(time=5 * _SCAN_S, parent_index=0, fragment_count=3, velocity_std=0.08)
        ],
        seed=seed,
        name="single-spawn",
        initial_position_std_km=2.0,
        initial_velocity_std_kmps=0.02,
    )


def preset_twenty_object(seed: int = 0) -> ScenarioConfig:
    """Twenty objects around the orbit; one breaks up inside the FOV."""
    sensor = _sensor(p_d=0.97)
    objects = [
        _circular_state(34000.0 + 100.0 * i, -14.0 + 18.0 * i) for i in range(20)
    ]
    return ScenarioConfig(
        objects=objects,
        sensor=sensor,
        clutter=uniform_clutter(sensor, expected_count=0.4),
        dynamics=DynamicsConfig(mu=MU_EARTH, dt=_SCAN_S, q=1e-9, integrator_substeps=16),
        duration=14 * _SCAN_S,
        scan_interval=_SCAN_S,
        spawn_events=[
            SpawnEvent(time=3 * _SCAN_S, parent_index=0, fragment_count=3, velocity_std=0.08)
        ],
        seed=seed,
        name="twenty-object",
        initial_position_std_km=2.0,
        initial_velocity_std_kmps=0.02,
    )


def preset_sixty_object(seed: int = 0) -> ScenarioConfig:
    """Sixty objects; used to stress the hypothesis-count bound."""
    sensor = _sensor(p_d=0.97)
    objects = [
        _circular_state(30000.0 + 150.0 * (i % 7), -13.0 + 6.0 * i) for i in range(60)
    ]
    return ScenarioConfig(
        objects=objects,
        sensor=sensor,
        clutter=uniform_clutter(sensor, expected_count=0.4),
        dynamics=DynamicsConfig(mu=MU_EARTH, dt=_SCAN_S, q=1e-9, integrator_substeps=16),
        duration=6 * _SCAN_S,
        scan_interval=_SCAN_S,
        spawn_events=[
            SpawnEvent(time=3 * _SCAN_S, parent_index=0, fragment_count=4, velocity_std=0.1)
        ],
        seed=seed,
        name="sixty-object",
        initial_position_std_km=2.0,
        initial_velocity_std_kmps=0.02,
    )


PRESETS = {
    "single-spawn": preset_single_spawn,
    "twenty-object": preset_twenty_object,
    "sixty-object": preset_sixty_object,
}

# Per-preset tracker tuning: hypothesis budget, children kept per parent,
# chain sizing, birth/death rates, and whether to adapt the rates to the
# measurement/object ratio (needed when births must out-compete many
# near-identical carry-over hypotheses).
TRACKER_TUNING: dict[str, dict] = {
    "single-spawn": dict(
        h_inf=50, children_kept=35, burn_in_steps=1500, record_steps=6000,
        chains_per_parent=1, alpha=0.02, beta=0.02, n_pixels=50,
        adapt_rates=False,
    ),
    "twenty-object": dict(
        h_inf=40, children_kept=60, burn_in_steps=1500, record_steps=6000,
        chains_per_parent=1, alpha=0.03, beta=0.01, n_pixels=50,
        adapt_rates=True,
    ),
    "sixty-object": dict(
        h_inf=10, children_kept=15, burn_in_steps=1000, record_steps=4000,
        chains_per_parent=1, alpha=0.02, beta=0.01, n_pixels=60,
        adapt_rates=True,
    ),
    "custom": dict(
        h_inf=50, children_kept=25, burn_in_steps=None, record_steps=None,
        chains_per_parent=1, alpha=0.01, beta=0.01, n_pixels=50,
        adapt_rates=False,
    ),
}


def tuning_for(name: str) -> dict:
    return dict(TRACKER_TUNING.get(name, TRACKER_TUNING["custom"]))


def tracker_config_for(scenario, seed=None, mode=None, **overrides):
    """Build a TrackerConfig from a scenario plus its preset tuning.

    Keyword overrides: h_inf, children_kept, burn_in_steps, record_steps,
    chains_per_parent, alpha, beta, n_pixels, adapt_rates.
    """
    from .hypotheses import BirthDeathConfig
    from .sampler import SamplerConfig
    from .tracker import TrackerConfig, TrackerMode

    tun = tuning_for(scenario.name)
    tun.update({k: v for k, v in overrides.items() if v is not None})
    return TrackerConfig(
        sensor=scenario.sensor,
        dynamics=scenario.dynamics,
        clutter=scenario.clutter,
        birth_death=BirthDeathConfig(
            alpha=tun["alpha"], beta=tun["beta"], n_pixels=tun["n_pixels"]
        ),
        sampler=SamplerConfig(
            burn_in_steps=tun["burn_in_steps"],
            record_steps=tun["record_steps"],
            children_kept=tun["children_kept"],
            seed=scenario.seed if seed is None else seed,
            chains_per_parent=tun["chains_per_parent"],
        ),
        h_inf=tun["h_inf"],
        mode=TrackerMode.MCMC if mode is None else mode,
        adapt_rates=tun["adapt_rates"],
    )
