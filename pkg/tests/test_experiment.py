import dataclasses

import numpy as np
import pytest

from conftest import random_density
from latticenoise.channels import apply_channel, standard_channel
from latticenoise.experiment import (
    ANALYZER_SETTINGS,
    InputState,
    MonteCarloConfig,
    PerturbedStack,
    analyzer_intensities,
    apply_stack,
    monte_carlo,
    physical_state,
    prepare_state,
    read_trajectory_csv,
    tomography,
    trajectory,
    write_trajectory_csv,
)
from latticenoise.metasurface import PatternProfile
from latticenoise.pauli import (
    KET_D,
    KET_H,
    KET_L,
    KET_R,
    SIGMA0,
    InvalidStateError,
    bloch_from_density,
    density_from_bloch,
    fidelity,
    pure_density,
)


def identity_profile(q=125):
    # QWP-HWP-QWP at (0, -pi/2, 0) is the identity
    z = np.zeros(q)
    return PatternProfile(2.5, 2.5 * np.arange(q) / q, z, z - np.pi / 2, z)


def test_prepare_named_states():
    assert np.allclose(bloch_from_density(prepare_state("H")), [1, 0, 0])
    assert np.allclose(prepare_state("L"), pure_density(KET_L))
    assert np.allclose(prepare_state("D"), pure_density(KET_D))
    rho = prepare_state(InputState("custom", (0.6, 0, 0.8)))
    assert np.trace(rho @ rho).real == pytest.approx(1)
    with pytest.raises(InvalidStateError):
        InputState("custom", (1, 1, 0))
    with pytest.raises(InvalidStateError):
        InputState("Q")


def test_analyzer_settings_transmit_named_polarizations():
    kets = {"H": KET_H, "V": (KET_L - KET_R) / np.sqrt(2), "D": KET_D,
            "A": (KET_L - 1j * KET_R) / np.sqrt(2), "L": KET_L, "R": KET_R}
    for name in ANALYZER_SETTINGS:
        inten = analyzer_intensities(pure_density(kets[name]))
        assert inten[name] == pytest.approx(1, abs=1e-14)


def test_tomography_inverts_traces(rng):
    assert np.allclose(tomography(SIGMA0 / 2), 0, atol=1e-15)
    for _ in range(10):
        rho = random_density(rng)
        assert np.abs(tomography(rho) - bloch_from_density(rho)).max() < 1e-12


def test_tomography_of_depolarized_d():
    rho = apply_channel(standard_channel("depolarizing", 0.5), prepare_state("D"))
    assert np.allclose(tomography(rho), [0, 1 / 3, 0], atol=1e-12)


def test_physical_state_projects_long_vectors():
    rho = physical_state([1.2, 0, 0])
    assert np.allclose(bloch_from_density(rho), [1, 0, 0])


def test_identity_profile_passes_states(rng):
    prof = identity_profile()
    for _ in range(5):
        rho = random_density(rng)
        assert np.allclose(apply_stack(prof, rho), rho, atol=1e-14)


@pytest.mark.parametrize("kind,p", [("phase_flip", 0.5), ("phase_flip", 0.25), ("depolarizing", 0.25)])
def test_stack_reproduces_channel(designs, kind, p, rng):
    _, prof = designs.get(kind, p)
    k = standard_channel(kind, p)
    for _ in range(20):
        rho = random_density(rng, pure=True)
        assert fidelity(apply_channel(k, rho), apply_stack(prof, rho)) >= 0.9999


def test_phase_flip_named_outputs(designs):
    _, prof = designs.get("phase_flip", 0.5)
    assert np.allclose(tomography(apply_stack(prof, prepare_state("H"))), 0, atol=1e-3)
    _, prof = designs.get("phase_flip", 0.25)
    assert np.allclose(tomography(apply_stack(prof, prepare_state("L"))), [0, 0, 1], atol=1e-3)


def test_cycling_samples_leaves_output_unchanged(designs, rng):
    _, prof = designs.get("depolarizing", 0.25)
    k = 17
    rolled = dataclasses.replace(
        prof, theta1=np.roll(prof.theta1, k), theta2=np.roll(prof.theta2, k),
        theta3=np.roll(prof.theta3, k),
    )
    rho = random_density(rng)
    assert np.abs(apply_stack(prof, rho) - apply_stack(rolled, rho)).max() < 1e-14


def test_zero_sigma_monte_carlo_is_exact(designs):
    _, prof = designs.get("bit_flip", 0.25)
    k = standard_channel("bit_flip", 0.25)
    e = monte_carlo(prof, "D", MonteCarloConfig(realizations=5, sigma_rel=0), k)
    assert np.all(e.std == 0)
    assert e.fidelity == pytest.approx(1, abs=1e-10)
    assert np.allclose(e.mean, [0, 0.5, 0], atol=1e-10)


def test_monte_carlo_deterministic_and_physical(designs):
    _, prof = designs.get("depolarizing", 0.5)
    cfg = MonteCarloConfig(realizations=30, seed=9)
    a = monte_carlo(prof, "L", cfg)
    b = monte_carlo(prof, "L", cfg)
    assert np.array_equal(a.samples, b.samples)
    assert np.all(np.linalg.norm(a.samples, axis=1) <= 1 + 1e-12)
    # realization k does not depend on how many others are drawn
    small = monte_carlo(prof, "L", MonteCarloConfig(realizations=10, seed=9))
    assert np.array_equal(small.samples, a.samples[:10])


def test_perturbed_draws():
    cfg = MonteCarloConfig(sigma_rel=0.05, seed=1)
    pts = [PerturbedStack.draw(cfg, k) for k in range(2000)]
    d = np.stack([p.delta for p in pts])
    o = np.stack([p.offset for p in pts])
    assert np.allclose(d.std(0) / [np.pi / 2, np.pi, np.pi / 2], 0.05, rtol=0.1)
    assert np.allclose(o.std(0), 0.05 * np.pi / 2, rtol=0.1)
    assert np.array_equal(PerturbedStack.nominal().offset, np.zeros(3))


def test_bands_shrink_with_more_realizations(designs):
    _, prof = designs.get("phase_flip", 0.25)
    e100 = monte_carlo(prof, "H", MonteCarloConfig(realizations=100, seed=2))
    e400 = monte_carlo(prof, "H", MonteCarloConfig(realizations=400, seed=2))
    sem100 = e100.std / np.sqrt(100)
    sem400 = e400.std / np.sqrt(400)
    ratio = sem400 / sem100
    assert np.all((ratio > 0.5 * 0.7) & (ratio < 0.5 * 1.3))


def test_trajectory_oracles(designs):
    profiles = {p: designs.get("phase_flip", p)[1] for p in (0.125, 0.25, 0.5)}
    mc = MonteCarloConfig(realizations=4, sigma_rel=0)
    res = trajectory("phase_flip", [0, 0.125, 0.25, 0.5], ["H"], mc, designs=profiles)
    assert res.ok
    assert np.allclose([e.mean[0] for e in res.entries], [1, 0.75, 0.5, 0], atol=1e-3)
    profiles = {0.125: designs.get("depolarizing", 0.125)[1]}
    res = trajectory("depolarizing", [0.125], ["L"], mc, designs=profiles)
    assert np.allclose(res.entries[0].mean, [0, 0, 5 / 6], atol=1e-3)


@pytest.mark.parametrize("kind,inp,axis", [("bit_flip", "H", 0), ("bit_phase_flip", "D", 1),
                                           ("phase_flip", "L", 2)])
def test_eigenstate_invariance(designs, kind, inp, axis):
    for p in (0.125, 0.25, 0.5):
        _, prof = designs.get(kind, p)
        s = tomography(apply_stack(prof, prepare_state(inp)))
        assert np.allclose(s, np.eye(3)[axis], atol=1e-3)


def test_trajectory_records_failures():
    res = trajectory("bit_flip", [0.25, 2.0], ["H"], MonteCarloConfig(realizations=2))
    assert not res.ok and 2.0 in res.failures
    assert len(res.entries) == 1


def test_trajectory_csv_round_trip(tmp_path, designs):
    _, prof = designs.get("bit_flip", 0.125)
    e = monte_carlo(prof, "H", MonteCarloConfig(realizations=8), standard_channel("bit_flip", 0.125),
                    "bit_flip", 0.125)
    path = write_trajectory_csv([e, e], tmp_path / "t.csv")
    rows = read_trajectory_csv(path)
    assert len(rows) == 2 and rows[0]["channel"] == "bit_flip"
    assert rows[0]["s1_sim"] == e.mean[0] and rows[0]["fidelity"] == e.fidelity
    assert b"\r" not in path.read_bytes()


def test_input_validation():
    with pytest.raises(ValueError):
        MonteCarloConfig(realizations=0)
    with pytest.raises(ValueError):
        MonteCarloConfig(sigma_rel=-1)
    assert density_from_bloch([0, 0, 0]).shape == (2, 2)
