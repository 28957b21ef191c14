"""Tests for tensors, differentiable ops, losses, Adam and the OPCK archive."""

import numpy as np
import pytest

from opera_forge.autodiff import ops
from opera_forge.autodiff.checkpoint import (
    decode_archive,
    encode_archive,
    load_archive,
    pack_text,
    save_archive,
    unpack_text,
)
from opera_forge.autodiff.gradcheck import grad_check
from opera_forge.autodiff.losses import (
    cross_entropy_logits,
    l2_penalty,
    mae_loss,
    masked_mse,
)
from opera_forge.autodiff.optim import AdamState, adam_step, cosine_lr
from opera_forge.autodiff.tensor import Tensor, backward, debug_checks, no_grad
from opera_forge.core.exceptions import (
    ArchiveError,
    ContractError,
    InvalidInputError,
    ShapeError,
    TargetIndexError,
    TrainingError,
)

GRAD_TOL = 1e-5


@pytest.fixture
def rng():
    return np.random.default_rng(42)


class TestTensor:
    """Tests for the Tensor type and the backward sweep."""

    def test_default_dtype_is_float32(self):
        """Test new tensors are float32 outside a precision block."""
        assert Tensor([1.0, 2.0]).data.dtype == np.float32

    def test_simple_gradient(self):
        """Test d(sum(x * x))/dx = 2x."""
        x = Tensor([1.0, -2.0, 3.0], requires_grad=True)
        backward(ops.reduce_sum(x * x))
        np.testing.assert_allclose(x.grad, [2.0, -4.0, 6.0])

    def test_shared_input_accumulates(self):
        """Test a tensor used twice receives both gradient contributions."""
        x = Tensor([2.0], requires_grad=True)
        y = x * x + x * 3.0
        backward(ops.reduce_sum(y))
        np.testing.assert_allclose(x.grad, [7.0])

    def test_non_scalar_loss(self):
        """Test backward needs a scalar."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError, match="scalar"):
            backward(x * 2.0)

    def test_no_grad_records_nothing(self):
        """Test ops inside no_grad do not require gradients."""
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad
        assert y.is_leaf

    def test_constant_inputs_get_no_grad(self):
        """Test constants stay without gradients."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor.constant([3.0, 4.0])
        backward(ops.reduce_sum(ops.mul(x, c)))
        assert c.grad is None
        np.testing.assert_allclose(x.grad, [3.0, 4.0])

    def test_debug_checks_catch_nan(self):
        """Test non-finite op outputs are reported inside debug_checks."""
        with debug_checks(), pytest.raises(InvalidInputError):
            ops.log(Tensor([-1.0]))


class TestGradients:
    """Finite-difference checks of every backward rule."""

    def test_broadcast_add_mul(self, rng):
        """Test broadcasting gradients sum back over expanded axes."""
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(1, 4))
        r = rng.normal(size=(3, 4))

        def fn(x, y):
            return ops.reduce_sum(ops.mul(ops.mul(ops.add(x, y), r), x))

        assert grad_check(fn, [a, b]) < GRAD_TOL

    def test_matmul_batched(self, rng):
        """Test batched matrix products."""
        a, b = rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5))
        r = rng.normal(size=(2, 3, 5))
        assert (
            grad_check(lambda x, y: ops.reduce_sum(ops.mul(x @ y, r)), [a, b])
            < GRAD_TOL
        )

    def test_conv2d_strided(self, rng):
        """Test the stride-2 valid convolution."""
        x, w = rng.normal(size=(2, 2, 7, 6)), rng.normal(size=(3, 2, 3, 3))
        r = rng.normal(size=(2, 3, 3, 2))
        assert (
            grad_check(
                lambda a, b: ops.reduce_sum(ops.mul(ops.conv2d(a, b, stride=2), r)),
                [x, w],
            )
            < GRAD_TOL
        )

    @pytest.mark.parametrize(
        "op", [ops.gelu, ops.layer_norm, ops.softmax], ids=["gelu", "ln", "softmax"]
    )
    def test_unary_ops(self, rng, op):
        """Test smooth elementwise and row-wise ops."""
        x, r = rng.normal(size=(3, 5)), rng.normal(size=(3, 5))
        assert grad_check(lambda a: ops.reduce_sum(ops.mul(op(a), r)), [x]) < GRAD_TOL

    def test_reductions_and_reshapes(self, rng):
        """Test mean over axes, transpose, reshape and concat."""
        x, y = rng.normal(size=(2, 3, 4)), rng.normal(size=(2, 3, 4))
        r = rng.normal(size=(8, 3))

        def fn(a, b):
            joined = ops.concat([a, b], axis=0)
            flat = ops.reshape(ops.transpose(joined, (0, 2, 1)), (16, 3))
            pooled = ops.reduce_mean(ops.reshape(flat, (8, 2, 3)), axis=1)
            return ops.reduce_sum(ops.mul(pooled, r))

        assert grad_check(fn, [x, y]) < GRAD_TOL

    def test_selection_ops(self, rng):
        """Test index_select with repeats and per-row gather."""
        x = rng.normal(size=(4, 5, 3))
        rows = np.array([[0, 2], [1, 1], [4, 0], [3, 2]])
        index = np.broadcast_to(rows[:, :, None], (4, 2, 3))

        def fn(a):
            picked = ops.index_select(a, [0, 0, 3], axis=0)
            gathered = ops.gather(a, index, axis=1)
            squares = ops.reduce_sum(ops.mul(picked, picked))
            return ops.add(squares, ops.reduce_sum(gathered))

        assert grad_check(fn, [x]) < GRAD_TOL

    def test_cross_entropy(self, rng):
        """Test the fused softmax cross-entropy."""
        logits = rng.normal(size=(4, 3))
        targets = np.array([0, 2, 1, 2])
        worst = grad_check(lambda z: cross_entropy_logits(z, targets), [logits])
        assert worst < GRAD_TOL

    def test_masked_mse_per_item(self, rng):
        """Test the 2-D mask form of the reconstruction loss."""
        pred, target = rng.normal(size=(2, 5, 3)), rng.normal(size=(2, 5, 3))
        mask = np.array([[0, 3], [4, 1]])
        assert grad_check(lambda p: masked_mse(p, target, mask), [pred]) < GRAD_TOL


class TestLosses:
    """Tests for loss values and argument checks."""

    def test_cross_entropy_uniform(self):
        """Test equal logits give log K."""
        loss = cross_entropy_logits(Tensor(np.zeros((2, 4))), np.array([0, 3]))
        assert loss.item() == pytest.approx(np.log(4.0), rel=1e-6)

    def test_cross_entropy_large_logits_are_stable(self):
        """Test huge logits do not overflow."""
        logits = Tensor(np.array([[1000.0, 0.0]]), dtype=np.float64)
        assert cross_entropy_logits(logits, np.array([0])).item() == pytest.approx(0.0)

    def test_cross_entropy_bad_target(self):
        """Test out-of-range targets raise TargetIndexError."""
        with pytest.raises(TargetIndexError):
            cross_entropy_logits(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_cross_entropy_needs_two_classes(self):
        """Test a single logit column is a shape error."""
        with pytest.raises(ShapeError):
            cross_entropy_logits(Tensor(np.zeros((2, 1))), np.array([0, 0]))

    def test_masked_mse_counts_masked_rows_only(self):
        """Test unmasked rows do not contribute."""
        pred = Tensor(np.array([[1.0], [5.0], [3.0]]))
        target = np.zeros((3, 1))
        loss = masked_mse(pred, target, np.array([0, 2]))
        assert loss.item() == pytest.approx((1.0 + 9.0) / 2)

    def test_masked_mse_empty_mask(self):
        """Test an empty mask is a contract violation."""
        with pytest.raises(ContractError):
            masked_mse(Tensor(np.zeros((3, 1))), np.zeros((3, 1)), np.array([]))

    def test_mae(self):
        """Test mean absolute error."""
        loss = mae_loss(Tensor(np.array([1.0, -1.0, 4.0])), np.array([0.0, 0.0, 0.0]))
        assert loss.item() == pytest.approx(2.0)

    def test_l2_penalty(self):
        """Test coefficient times squared norm."""
        penalty = l2_penalty(Tensor(np.array([3.0, 4.0])), 0.1)
        assert penalty.item() == pytest.approx(2.5)


class TestAdam:
    """Tests for the Adam optimizer."""

    def test_first_step_moves_by_lr(self):
        """Test the bias-corrected first step has size lr per coordinate."""
        p = Tensor(np.array([1.0, -1.0]), requires_grad=True, dtype=np.float64)
        state = AdamState(lr=0.1)
        adam_step({"w": p}, {"w": np.array([0.5, -2.0])}, state)
        np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-6)
        assert state.t == 1

    def test_minimizes_quadratic(self):
        """Test repeated steps approach the minimum of (w - 3)^2."""
        w = Tensor(np.array([0.0]), requires_grad=True, dtype=np.float64)
        state = AdamState(lr=0.1)
        for _ in range(300):
            loss = ops.reduce_sum(ops.mul(ops.sub(w, 3.0), ops.sub(w, 3.0)))
            backward(loss)
            adam_step({"w": w}, {"w": w.grad}, state)
        assert w.data[0] == pytest.approx(3.0, abs=0.05)

    def test_non_finite_gradient(self):
        """Test a NaN gradient names the parameter."""
        p = Tensor(np.zeros(2), requires_grad=True)
        with pytest.raises(TrainingError, match="parameter=w"):
            adam_step({"w": p}, {"w": np.array([np.nan, 0.0])}, AdamState())

    def test_shape_mismatch(self):
        """Test a gradient of the wrong shape is rejected."""
        p = Tensor(np.zeros(2), requires_grad=True)
        with pytest.raises(ShapeError):
            adam_step({"w": p}, {"w": np.zeros(3)}, AdamState())

    def test_cosine_schedule(self):
        """Test the schedule starts at the base rate and ends at zero."""
        assert cosine_lr(1.0, 0, 11) == pytest.approx(1.0)
        assert cosine_lr(1.0, 5, 11) == pytest.approx(0.5)
        assert cosine_lr(1.0, 10, 11) == pytest.approx(0.0, abs=1e-12)
        assert cosine_lr(0.3, 0, 1) == 0.3


class TestArchive:
    """Tests for the OPCK named-tensor archive."""

    def test_round_trip_file(self, tmp_path):
        """Test names, shapes and values survive a save and load."""
        tensors = {
            "encoder.w": np.arange(6, dtype=np.float32).reshape(2, 3),
            "scalar": np.array(1.5, dtype=np.float32),
        }
        save_archive(tmp_path / "a.opck", tensors)
        back = load_archive(tmp_path / "a.opck")
        assert list(back) == ["encoder.w", "scalar"]
        np.testing.assert_array_equal(back["encoder.w"], tensors["encoder.w"])
        assert back["scalar"].shape == ()

    def test_text_entries(self):
        """Test UTF-8 text rides along as byte values."""
        assert unpack_text(pack_text('{"kind": "vit", "é": 1}')) == (
            '{"kind": "vit", "é": 1}'
        )

    def test_trailing_bytes(self):
        """Test extra bytes after the last tensor are rejected."""
        payload = encode_archive({"x": np.zeros(2)}) + b"\x00"
        with pytest.raises(ArchiveError, match="trailing"):
            decode_archive(payload)

    def test_bad_version(self):
        """Test an unknown version is rejected."""
        payload = bytearray(encode_archive({}))
        payload[4] = 9
        with pytest.raises(ArchiveError, match="version"):
            decode_archive(bytes(payload))
