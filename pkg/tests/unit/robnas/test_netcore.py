import numpy as np
import pytest

from robnas.algo import cellnet, netcore
from robnas.algo.cellspace import parse_genotype
from robnas.data.cell import Genotype, Operator
from robnas.data.network import Activation, Family, NetworkSpec, WeightSet
from robnas.errors import ValidationError


def unit(vector):
    vector = np.asarray(vector, dtype=np.float64)
    return vector / np.linalg.norm(vector)


def random_unit(rng, shape):
    return unit(rng.standard_normal(shape))


def finite_difference(function, W, index, h=None):
    flat = W.flat()
    h = h or 1e-7 * (1 + abs(flat[index]))
    plus, minus = flat.copy(), flat.copy()
    plus[index] += h
    minus[index] -= h
    return (function(WeightSet.from_flat(W.spec, plus)) - function(WeightSet.from_flat(W.spec, minus))) / (2 * h)


class UnscaledSpec(NetworkSpec):
    @property
    def branch_scale(self):
        return 1.0


# Initialization
# --------------

def test_init_deterministic():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=4, width=32)
    first = netcore.init_weights(spec, 7)
    second = netcore.init_weights(spec, 7)
    other = netcore.init_weights(spec, 8)

    assert all(np.array_equal(a, b) for a, b in zip(first.arrays, second.arrays))
    assert not np.array_equal(first.flat(), other.flat())
    assert first.seed == 7


def test_init_variance():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=1024)
    W = netcore.init_weights(spec, 0)
    assert W['W2'].var() == pytest.approx(1 / 1024, rel=0.05)


def test_init_spectral_norm():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=64)
    passed = sum(np.linalg.norm(netcore.init_weights(spec, seed)['W2'], 2) <= 3 for seed in range(100))
    assert passed >= 99


def test_init_cell_network():
    spec = NetworkSpec(Family.CELL_NETWORK, genotype=Genotype((Operator.CONV3X3,) * 6), stem_channels=4)
    W = netcore.init_weights(spec, 0)
    assert W.names[0] == 'stem'
    assert W['cell1.edge5'].shape == (4, 36)
    assert np.all(W['bias'] == 0)


def test_weight_set_shapes():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=8, input_dim=4)
    with pytest.raises(ValidationError, match='Layer W1'):
        WeightSet(spec, (np.zeros((3, 4)), np.zeros((8, 8)), np.zeros(8)))

    W = netcore.init_weights(spec, 0)
    assert np.array_equal(WeightSet.from_flat(spec, W.flat()).flat(), W.flat())
    with pytest.raises(ValueError):
        W['W1'][0, 0] = 1.0


# Residual FCNN
# -------------

def test_fcnn_zero_network():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=8, input_dim=4)
    output, _ = netcore.forward_fcnn(unit([1, 2, 3, 4]), WeightSet.zeros(spec))
    assert output == 0


def test_fcnn_skip_pass_through():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=8, input_dim=4, skip_flags=(1,))
    W = netcore.init_weights(spec, 0)
    W = W.replace({'W2': np.zeros((8, 8))})
    _, post = netcore.forward_fcnn(unit([1, 2, 3, 4]), W)
    assert np.array_equal(post[1], post[0])


def test_fcnn_input_checks():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=8, input_dim=4)
    W = netcore.init_weights(spec, 0)

    with pytest.raises(ValidationError, match='unit norm'):
        netcore.forward_fcnn(np.array([1.0, 1.0, 0.0, 0.0]), W)
    with pytest.raises(ValidationError, match='shape'):
        netcore.forward_fcnn(unit([1, 2, 3]), W)

    netcore.forward_fcnn(np.array([1.0, 1.0, 0.0, 0.0]), W, check_norm=False)


def test_fcnn_output_order():
    rng = np.random.default_rng(0)
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=2048, input_dim=16)
    for seed in range(20):
        _, post = netcore.forward_fcnn(random_unit(rng, 16), netcore.init_weights(spec, seed))
        assert 0.1 <= np.linalg.norm(post[-1]) <= 10


def test_fcnn_depth_scaling():
    rng = np.random.default_rng(0)
    x = random_unit(rng, 16)

    scaled = NetworkSpec(Family.RESIDUAL_FCNN, depth=20, width=512, input_dim=16)
    _, post = netcore.forward_fcnn(x, netcore.init_weights(scaled, 0))
    assert 0.1 <= np.linalg.norm(post[-1]) <= 10

    # Without the 1/L branch factor the same network blows up
    unscaled = UnscaledSpec(Family.RESIDUAL_FCNN, depth=20, width=512, input_dim=16)
    _, post = netcore.forward_fcnn(x, netcore.init_weights(unscaled, 0))
    assert np.linalg.norm(post[-1]) > 10


# Patches and CNN
# ---------------

def test_extract_patches():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, 7))
    assert np.array_equal(netcore.extract_patches(X, 1), X)

    a, b, c = 1.0, 2.0, 3.0
    patches = netcore.extract_patches(np.array([[a, b, c]]), 3)
    assert patches[:, 0].tolist() == [0, a, b]
    assert patches[:, 1].tolist() == [a, b, c]
    assert patches[:, 2].tolist() == [b, c, 0]

    for size in (3, 5):
        assert np.linalg.norm(netcore.extract_patches(X, size)) <= np.sqrt(size) * np.linalg.norm(X) + 1e-12

    with pytest.raises(ValidationError):
        netcore.extract_patches(X, 2)


def test_fold_patches_adjoint():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((3, 6))
    P = rng.standard_normal((9, 6))
    assert np.vdot(netcore.extract_patches(X, 3), P) == pytest.approx(np.vdot(X, netcore.fold_patches(P, 3)))


def test_conv_direct():
    rng = np.random.default_rng(2)
    for size in (1, 3, 5):
        X = rng.standard_normal((4, 9))
        weights = rng.standard_normal((6, 4 * size))
        np.testing.assert_allclose(weights @ netcore.extract_patches(X, size), netcore.conv_direct(weights, X, size),
                                   rtol=0, atol=1e-12)


def test_cnn_reduces_to_fcnn():
    rng = np.random.default_rng(3)
    fcnn = NetworkSpec(Family.RESIDUAL_FCNN, depth=4, width=16, input_dim=5)
    cnn = NetworkSpec(Family.RESIDUAL_CNN, depth=4, width=16, input_dim=5, pixels=1, filter_size=1)
    W = netcore.init_weights(fcnn, 0)
    W_cnn = WeightSet(cnn, W.arrays[:-1] + (W.arrays[-1].reshape(16, 1),))
    x = random_unit(rng, 5)

    fcnn_output, _ = netcore.forward_fcnn(x, W)
    cnn_output, _ = netcore.forward_cnn(x[:, None], W_cnn)
    assert cnn_output == pytest.approx(fcnn_output, abs=1e-12)


def test_cnn_zero_network():
    spec = NetworkSpec(Family.RESIDUAL_CNN, depth=3, width=4, input_dim=2, pixels=5, filter_size=3)
    X = random_unit(np.random.default_rng(0), (2, 5))
    output, features = netcore.forward_cnn(X, WeightSet.zeros(spec))
    assert output == 0
    assert features[0].shape == (4, 5)


# Gradients
# ---------

def test_gradient_linear():
    spec = NetworkSpec(Family.LINEAR, input_dim=3)
    x = np.array([0.2, -0.4, 0.5])
    W = netcore.init_weights(spec, 0)
    assert np.array_equal(netcore.gradient_wrt_weights(W, x), x)


@pytest.mark.parametrize('spec', [
    NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=8, input_dim=5, activations=(Activation.SIGMOID,)),
    NetworkSpec(Family.RESIDUAL_FCNN, depth=4, width=8, input_dim=5,
                activations=(Activation.ERF, Activation.RELU, Activation.LEAKY_RELU), skip_flags=(1, 0)),
    NetworkSpec(Family.RESIDUAL_CNN, depth=3, width=4, input_dim=3, pixels=6, filter_size=3,
                activations=(Activation.ERF,)),
    NetworkSpec(Family.RESIDUAL_CNN, depth=4, width=4, input_dim=2, pixels=5, filter_size=5, output_scale=2.0),
    NetworkSpec(Family.TWO_LAYER, width=16, input_dim=5, activations=(Activation.SIGMOID,)),
])
def test_gradient_finite_differences(spec):
    rng = np.random.default_rng(4)
    W = netcore.init_weights(spec, 1)
    x = random_unit(rng, spec.input_shape())

    gradient = netcore.gradient_wrt_weights(W, x)
    indices = rng.choice(spec.parameter_count, size=min(50, spec.parameter_count), replace=False)
    numeric = [finite_difference(lambda V: netcore.forward(V, x), W, i) for i in indices]
    np.testing.assert_allclose(gradient[indices], numeric, rtol=1e-4, atol=1e-8)


def test_gradient_last_layer():
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=8, input_dim=4)
    W = netcore.init_weights(spec, 0)
    W = W.replace({'W3': np.zeros(8)})
    x = unit([1, 2, 3, 4])

    output, post = netcore.forward_fcnn(x, W)
    assert output == 0
    assert np.array_equal(netcore.gradient_wrt_weights(W, x)[-8:], post[-1])


def test_gradient_wrt_input_linear_logistic():
    spec = NetworkSpec(Family.LINEAR, input_dim=2)
    w = np.array([1.0, -2.0])
    W = WeightSet(spec, (w,))
    x = np.array([0.5, 0.5])

    f = netcore.forward(W, x)
    np.testing.assert_allclose(netcore.gradient_wrt_input(W, x, 1), -w / (1 + np.exp(f)))

    # f = 0: both labels push equally in opposite directions
    x0 = unit([2, 1])
    assert netcore.forward(W, x0) == pytest.approx(0, abs=1e-15)
    np.testing.assert_allclose(netcore.gradient_wrt_input(W, x0, 1) + netcore.gradient_wrt_input(W, x0, -1), 0,
                               atol=1e-15)


def test_gradient_wrt_input_finite_differences():
    rng = np.random.default_rng(5)
    spec = NetworkSpec(Family.RESIDUAL_FCNN, depth=3, width=8, input_dim=6, activations=(Activation.ERF,))
    W = netcore.init_weights(spec, 2)
    x = random_unit(rng, 6)

    gradient = netcore.gradient_wrt_input(W, x, -1)
    h = 1e-6
    numeric = [
        (netcore.loss_value(W, x + h * e, -1) - netcore.loss_value(W, x - h * e, -1)) / (2 * h)
        for e in np.eye(6)
    ]
    np.testing.assert_allclose(gradient, numeric, rtol=1e-4, atol=1e-9)


def test_loss_and_gradient():
    spec = NetworkSpec(Family.TWO_LAYER, width=8, input_dim=3)
    W = netcore.init_weights(spec, 0)
    x = unit([1, -1, 2])

    loss, gradient = netcore.loss_and_gradient(W, x, -1)
    assert loss == pytest.approx(netcore.loss_value(W, x, -1))
    f = netcore.forward(W, x)
    np.testing.assert_allclose(gradient, netcore.gradient_wrt_weights(W, x) / (1 + np.exp(-f)))


# Cell network
# ------------

def small_cell_spec(genotype, **kwargs):
    settings = dict(stem_channels=4, image_size=4, num_classes=3, cell_count=2)
    settings.update(kwargs)
    return NetworkSpec(Family.CELL_NETWORK, genotype=genotype, **settings)


def test_cell_network_all_zeroize():
    spec = small_cell_spec(Genotype((Operator.ZEROIZE,) * 6))
    W = netcore.init_weights(spec, 0)
    W = W.replace({'bias': np.array([0.5, -1.0, 2.0])})
    images = np.random.default_rng(0).uniform(size=(2, 3, 4, 4))

    logits = netcore.forward_cell_network(images, W)
    assert np.array_equal(logits, np.tile([0.5, -1.0, 2.0], (2, 1)))


def test_cell_network_all_skip():
    spec = small_cell_spec(Genotype((Operator.SKIP_CONNECT,) * 6))
    W = netcore.init_weights(spec, 0)
    images = np.random.default_rng(0).uniform(size=(2, 3, 4, 4))

    stem = (W['stem'] @ cellnet.im2col(images, 3)).reshape(2, 4, 4, 4)
    expected = stem.mean(axis=(2, 3)) @ W['classifier'].T + W['bias']
    np.testing.assert_allclose(netcore.forward_cell_network(images, W), expected, rtol=1e-12, atol=1e-12)


def test_cell_network_single_image():
    spec = small_cell_spec(parse_genotype('|nor_conv_3x3~0|+|skip_connect~0|avg_pool_3x3~1|+|none~0|nor_conv_1x1~1|skip_connect~2|'))
    W = netcore.init_weights(spec, 0)
    image = np.random.default_rng(0).uniform(size=(3, 4, 4))

    logits = netcore.forward_cell_network(image, W)
    assert logits.shape == (1, 3)
    assert netcore.forward(W, image) == pytest.approx(logits.sum())

    with pytest.raises(ValidationError):
        netcore.forward_cell_network(np.zeros((1, 3, 5, 5)), W)


def test_cell_network_gradients():
    rng = np.random.default_rng(6)
    spec = small_cell_spec(parse_genotype('|nor_conv_3x3~0|+|skip_connect~0|avg_pool_3x3~1|+|none~0|nor_conv_1x1~1|skip_connect~2|'))
    W = netcore.init_weights(spec, 3)
    image = rng.uniform(size=(3, 4, 4))

    gradient = netcore.gradient_wrt_weights(W, image)
    indices = rng.choice(spec.parameter_count, size=50, replace=False)
    numeric = [finite_difference(lambda V: netcore.forward(V, image), W, i) for i in indices]
    np.testing.assert_allclose(gradient[indices], numeric, rtol=1e-4, atol=1e-8)

    input_gradient = netcore.gradient_wrt_input(W, image, 2)
    h = 1e-7
    for _ in range(10):
        position = tuple(rng.integers(size) for size in image.shape)
        step = np.zeros_like(image)
        step[position] = h
        numeric = (netcore.loss_value(W, image + step, 2) - netcore.loss_value(W, image - step, 2)) / (2 * h)
        assert input_gradient[position] == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_cell_network_batch_input_gradient():
    rng = np.random.default_rng(7)
    spec = small_cell_spec(Genotype((Operator.CONV1X1,) * 6))
    W = netcore.init_weights(spec, 0)
    images = rng.uniform(size=(3, 3, 4, 4))
    labels = np.array([0, 2, 1])

    batch = netcore.gradient_wrt_input(W, images, labels)
    for image, label, gradient in zip(images, labels, batch):
        np.testing.assert_allclose(gradient, netcore.gradient_wrt_input(W, image, label), rtol=1e-10, atol=1e-14)
