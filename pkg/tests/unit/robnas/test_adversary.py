import numpy as np
import pytest

from robnas.algo import adversary as adv
from robnas.algo import netcore
from robnas.data.adversary import PIXEL_RANGE, AdversaryConfig, AttackKind, Norm, evaluation_presets
from robnas.data.cell import Operator, Genotype
from robnas.data.network import Family, NetworkSpec, WeightSet
from robnas.errors import ValidationError


def linear_model(w):
    w = np.asarray(w, dtype=np.float64)
    return WeightSet(NetworkSpec(Family.LINEAR, input_dim=len(w)), (w,))


# Settings
# --------

def test_config_defaults():
    pgd = AdversaryConfig.pgd(8 / 255)
    assert pgd.steps == 20
    assert pgd.step_size == pytest.approx(2.5 * (8 / 255) / 20)
    assert pgd.clamp == PIXEL_RANGE

    fgsm = AdversaryConfig.fgsm(3 / 255)
    assert fgsm.steps == 1
    assert fgsm.step_size == 3 / 255

    training = AdversaryConfig.training_preset()
    assert (training.kind, training.steps, training.step_size, training.radius) == \
        (AttackKind.PGD, 7, 2 / 255, 8 / 255)
    assert repr(training) == 'AdversaryConfig(pgd l_inf ρ=8/255 steps=7 step=2/255 clamp=(0.0, 1.0))'


def test_config_validation():
    with pytest.raises(ValidationError):
        AdversaryConfig(AttackKind.FGSM, 0.1, steps=2)
    with pytest.raises(ValidationError):
        AdversaryConfig(AttackKind.FGSM, 0.1, steps=1, step_size=0.05)
    with pytest.raises(ValidationError):
        AdversaryConfig(radius=-0.1)
    with pytest.raises(ValidationError):
        AdversaryConfig(steps=0)
    with pytest.raises(ValidationError):
        AdversaryConfig(norm=Norm.L2_SPHERE, clamp=(0, 1))
    with pytest.raises(ValueError):
        AdversaryConfig(kind='autoattack')


def test_presets():
    presets = evaluation_presets()
    assert list(presets) == ['fgsm_3_255', 'pgd_3_255', 'fgsm_8_255', 'pgd_8_255']
    assert presets['pgd_3_255'].step_size == pytest.approx(2.5 * (3 / 255) / 20)
    assert repr(presets['pgd_3_255']) == 'AdversaryConfig(pgd l_inf ρ=3/255 steps=20 step=0.375/255 clamp=(0.0, 1.0))'


def test_with_radius():
    config = AdversaryConfig.pgd(8 / 255).with_radius(16 / 255)
    assert config.radius == 16 / 255
    assert config.step_size == pytest.approx(2.5 * (16 / 255) / 20)
    assert config.metric_name == 'pgd_16_255'
    assert AdversaryConfig.fgsm(3 / 255).with_radius(8 / 255).step_size == 8 / 255


# Projection
# ----------

def test_project_l_inf():
    center = np.array([0.0, 0.5, 1.0])
    point = np.array([0.3, 0.45, 1.2])
    assert adv.project(point, center, 0.1).tolist() == pytest.approx([0.1, 0.45, 1.1])
    assert adv.project(point, center, 0.1, clamp=(0, 1)).tolist() == pytest.approx([0.1, 0.45, 1.0])


def test_project_sphere():
    rng = np.random.default_rng(0)
    for _ in range(100):
        center = adv.normalize_input(rng.standard_normal(5))
        point = rng.standard_normal(5) * rng.uniform(0.1, 3)
        radius = rng.uniform(0.01, 1.5)

        projected = adv.project(point, center, radius, Norm.L2_SPHERE)
        assert np.linalg.norm(projected) == pytest.approx(1, abs=1e-12)
        assert np.linalg.norm(projected - center) <= radius + 1e-12


def test_normalize_input():
    assert np.linalg.norm(adv.normalize_input([3.0, 4.0])) == pytest.approx(1)
    with pytest.raises(ValidationError):
        adv.normalize_input(np.zeros(3))


# Attacks
# -------

def test_fgsm_linear_logistic():
    W = linear_model([1.0, -2.0])
    x = np.array([0.5, 0.5])
    np.testing.assert_allclose(adv.fgsm(x, 1, W, 0.1), [0.4, 0.6])
    assert np.array_equal(adv.fgsm(x, 1, W, 0.0), x)


def test_fgsm_is_one_pgd_step():
    rng = np.random.default_rng(1)
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=16, input_dim=8)
    W = netcore.init_weights(spec, 0)
    x = rng.uniform(size=8)

    fgsm = adv.fgsm(x, -1, W, 8 / 255, clamp=PIXEL_RANGE)
    pgd = adv.pgd(x, -1, W, AdversaryConfig.pgd(8 / 255, steps=1, step_size=8 / 255))
    assert np.array_equal(fgsm, pgd)


def test_attack_ball_membership():
    rng = np.random.default_rng(2)
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=16, input_dim=8)
    W = netcore.init_weights(spec, 1)
    for config in (AdversaryConfig.pgd(8 / 255), AdversaryConfig.fgsm(3 / 255),
                   AdversaryConfig.pgd(16 / 255, random_start=True, seed=5)):
        for _ in range(20):
            x = rng.uniform(size=8)
            attacked = adv.pgd(x, rng.choice([-1, 1]), W, config)
            assert np.max(np.abs(attacked - x)) <= config.radius + 1e-12
            assert attacked.min() >= 0 and attacked.max() <= 1

            twice = adv.twice_perturb(x, 1, W, config)
            assert np.max(np.abs(twice - x)) <= 2 * config.radius + 1e-12


def test_attack_sphere_membership():
    rng = np.random.default_rng(3)
    spec = NetworkSpec(Family.TWO_LAYER, width=32, input_dim=6)
    W = netcore.init_weights(spec, 0)
    config = AdversaryConfig.on_sphere(0.2)
    for _ in range(20):
        x = adv.normalize_input(rng.standard_normal(6))
        attacked = adv.pgd(x, 1, W, config)
        assert np.linalg.norm(attacked) == pytest.approx(1, abs=1e-12)
        assert np.linalg.norm(attacked - x) <= 0.2 + 1e-12


def test_pgd_increases_loss():
    rng = np.random.default_rng(4)
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=16, input_dim=8)
    config = AdversaryConfig.pgd(8 / 255, clamp=None)
    increased = 0
    for trial in range(40):
        W = netcore.init_weights(spec, trial)
        x, y = rng.uniform(size=8), rng.choice([-1, 1])
        increased += netcore.loss_value(W, adv.pgd(x, y, W, config), y) >= netcore.loss_value(W, x, y) - 1e-9
    assert increased >= 38


def test_twice_on_linear_model():
    W = linear_model([1.0, -2.0, 0.5])
    x = np.array([0.2, 0.1, -0.3])
    config = AdversaryConfig.pgd(0.05, clamp=None)

    twice = adv.twice_perturb(x, -1, W, config)
    np.testing.assert_allclose(twice, adv.pgd(x, -1, W, config.with_radius(0.1)), rtol=0, atol=1e-15)


def test_zero_radius():
    W = linear_model([1.0, -2.0])
    x = np.array([0.5, 0.5])
    config = AdversaryConfig.pgd(0.0, clamp=None)
    assert np.array_equal(adv.pgd(x, 1, W, config), x)
    assert np.array_equal(adv.twice_perturb(x, 1, W, config), x)


def test_random_start_deterministic():
    rng = np.random.default_rng(5)
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=16, input_dim=8)
    W = netcore.init_weights(spec, 0)
    x = rng.uniform(size=8)
    config = AdversaryConfig.pgd(8 / 255, steps=3, random_start=True, seed=3)

    assert np.array_equal(adv.pgd(x, 1, W, config), adv.pgd(x, 1, W, config))
    assert np.array_equal(adv.pgd(x, 1, W, AdversaryConfig.pgd(8 / 255, steps=3)),
                          adv.pgd(x, 1, W, AdversaryConfig.pgd(8 / 255, steps=3)))


def test_attack_batch_cell_network():
    rng = np.random.default_rng(6)
    spec = NetworkSpec(Family.CELL_NETWORK, genotype=Genotype((Operator.CONV3X3, Operator.SKIP_CONNECT) * 3),
                       stem_channels=4, image_size=4, num_classes=3, cell_count=1)
    W = netcore.init_weights(spec, 0)
    images = rng.uniform(size=(3, 3, 4, 4))
    labels = np.array([0, 1, 2])
    config = AdversaryConfig.pgd(8 / 255, steps=5)

    batch = adv.attack_batch(images, labels, W, config)
    assert batch.shape == images.shape
    assert np.max(np.abs(batch - images)) <= 8 / 255 + 1e-12
    for image, label, attacked in zip(images, labels, batch):
        np.testing.assert_allclose(attacked, adv.pgd(image, label, W, config), atol=1e-12)

    with pytest.raises(ValidationError):
        adv.attack_batch(images[:0], labels[:0], W, config)
