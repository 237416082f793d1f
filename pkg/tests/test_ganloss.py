"""
Tests for the GAN objectives and the fixture evaluator.
"""
import math
import os

import numpy as np
import pytest

from Data.fixtures import make_gan_fixture
from Data.io import save_json
from features.ganloss import (
    DomainBatch, GanLossWeights, GanTrainingConstants, clamp_predictions, cycle_loss, cyclegan_total,
    evaluate_gan_fixture, gan_loss_discriminator, gan_loss_generator, identity_loss, l1_loss, named_mapping,
    pix2pix_total,
)
from utils.errors import ConfigError, NonFiniteError, PredictionDomainError, ShapeMismatchError
from utils.rng import derive_stream

IDENTITY = named_mapping("identity")


def _domains(seed=0, n=3, size=6):
    stream = derive_stream(seed, 0)
    return DomainBatch(stream.random(size=(n, size, size, 3)), stream.random(size=(n, size, size, 3)))


class TestL1:
    def test_equal_images(self):
        a = derive_stream(1, 0).random(size=(2, 4, 4, 3))
        assert l1_loss(a, a) == 0.0

    def test_zeros_vs_ones(self):
        assert l1_loss(np.zeros((4, 4, 3)), np.ones((4, 4, 3))) == 1.0

    def test_matches_loop(self):
        stream = derive_stream(2, 0)
        a, b = stream.random(size=(3, 5, 4, 3)), stream.random(size=(3, 5, 4, 3))
        per_image = []
        for n in range(3):
            total = 0.0
            for i in range(5):
                for j in range(4):
                    for c in range(3):
                        total += abs(a[n, i, j, c] - b[n, i, j, c])
            per_image.append(total / 60)
        assert l1_loss(a, b) == pytest.approx(sum(per_image) / 3, abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            l1_loss(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class TestAdversarial:
    def test_half_predictions(self):
        half = np.full((2, 4, 4), 0.5)
        assert gan_loss_discriminator(half, half) == pytest.approx(2 * math.log(2))
        assert gan_loss_generator(half) == pytest.approx(math.log(2))

    def test_confident_discriminator_goes_to_zero(self):
        eps = 1e-9
        assert gan_loss_discriminator(np.full(4, 1 - eps), np.full(4, eps)) < 1e-6
        assert gan_loss_generator(np.full(4, 1 - eps)) < 1e-6

    def test_generator_loss_grows_as_fakes_are_caught(self):
        assert gan_loss_generator(np.full(4, 1e-6)) > gan_loss_generator(np.full(4, 0.1)) > 10 * 0.2

    @pytest.mark.parametrize("value", [0.0, 1.0, -0.1, float("nan")])
    def test_domain(self, value):
        bad = np.array([0.5, value])
        with pytest.raises(PredictionDomainError):
            gan_loss_discriminator(bad, np.full(2, 0.5))
        with pytest.raises(PredictionDomainError):
            gan_loss_generator(bad)

    def test_clamp_predictions_enters_domain(self):
        clamped = clamp_predictions(np.array([0.0, 0.5, 1.0]))
        assert clamped[0] > 0.0 and clamped[2] < 1.0 and clamped[1] == 0.5
        assert math.isfinite(gan_loss_discriminator(clamped, clamped))


class TestCycleAndIdentity:
    def test_identity_mappings_give_zero(self):
        d = _domains()
        assert cycle_loss(IDENTITY, IDENTITY, d) == 0.0
        assert identity_loss(IDENTITY, IDENTITY, d) == 0.0

    def test_constant_offset_cycle(self):
        d = DomainBatch(np.full((2, 4, 4, 3), 0.3), np.full((2, 4, 4, 3), 0.6))
        G = named_mapping("offset:0.1")
        # both round trips end up 0.1 off
        assert cycle_loss(G, IDENTITY, d) == pytest.approx(0.2)
        assert cycle_loss(G, named_mapping("offset:-0.1"), d) == pytest.approx(0.0, abs=1e-12)

    def test_zero_mapping_identity_loss(self):
        d = DomainBatch(np.full((2, 4, 4, 3), 0.5), np.full((2, 4, 4, 3), 0.5))
        assert identity_loss(IDENTITY, named_mapping("zero"), d) == pytest.approx(0.5)

    def test_random_handles_match_manual_composition(self):
        d = _domains(3)
        G, F = named_mapping("scale:0.7"), named_mapping("invert")
        expected_cycle = l1_loss(1.0 - 0.7 * d.batch_x, d.batch_x) + l1_loss(0.7 * (1.0 - d.batch_y), d.batch_y)
        expected_identity = l1_loss(1.0 - d.batch_x, d.batch_x) + l1_loss(0.7 * d.batch_y, d.batch_y)
        assert cycle_loss(G, F, d) == pytest.approx(expected_cycle, abs=1e-12)
        assert identity_loss(G, F, d) == pytest.approx(expected_identity, abs=1e-12)

    def test_mapping_must_keep_shape(self):
        with pytest.raises(ShapeMismatchError):
            cycle_loss(lambda img: img[:-1], IDENTITY, _domains())

    @pytest.mark.parametrize("spec", ["blur", "offset", "scale:x", "identity:1"])
    def test_unknown_mapping(self, spec):
        with pytest.raises(ConfigError):
            named_mapping(spec)


class TestTotals:
    def test_cyclegan_total(self):
        assert cyclegan_total(0.5, 0.5, 0.1, 0.2) == pytest.approx(3.0)
        assert cyclegan_total(0.0, 0.0, 0.0, 0.0) == 0.0
        assert cyclegan_total(0.4, 0.3, 9.0, 9.0, GanLossWeights(cycle=0.0, identity=0.0)) == pytest.approx(0.7)

    def test_pix2pix_total(self):
        assert pix2pix_total(0.7, 0.01) == pytest.approx(1.7)
        assert pix2pix_total(0.42, 0.0) == 0.42
        assert pix2pix_total(0.0, 1.0) == 100.0

    def test_non_finite_component(self):
        with pytest.raises(NonFiniteError):
            cyclegan_total(float("inf"), 0.0, 0.0, 0.0)
        with pytest.raises(NonFiniteError):
            pix2pix_total(0.0, float("nan"))

    def test_negative_weight(self):
        with pytest.raises(ConfigError):
            GanLossWeights(cycle=-1.0)

    def test_training_constants(self):
        constants = GanTrainingConstants()
        assert constants.adam_lr == 2e-4
        assert (constants.adam_beta1, constants.adam_beta2) == (0.5, 0.999)
        assert (constants.pix2pix_epochs, constants.cyclegan_epochs) == (25, 100)
        assert GanTrainingConstants.from_dict(constants.to_dict()) == constants


class TestFixtureEvaluation:
    def test_identity_fixture(self, tmp_path):
        directory = make_gan_fixture(str(tmp_path / "gan"), seed=3)
        terms = evaluate_gan_fixture(directory)
        assert terms["cycle"] == 0.0
        assert terms["identity"] == 0.0
        assert terms["pix2pix_l1"] == 0.0
        assert terms["gan_xy_generator"] == pytest.approx(math.log(2), rel=1e-8)
        assert terms["gan_xy_discriminator"] == pytest.approx(2 * math.log(2), rel=1e-8)
        assert terms["cyclegan_total"] == pytest.approx(2 * math.log(2), rel=1e-8)
        assert list(terms) == sorted(terms)

    def test_weights_file(self, tmp_path):
        directory = make_gan_fixture(str(tmp_path / "gan"), seed=3)
        save_json({"cycle": 0.0, "identity": 0.0, "pix2pix_l1": 0.0}, os.path.join(directory, "weights.json"))
        save_json({"G": "invert", "F": "identity"}, os.path.join(directory, "mappings.json"))
        terms = evaluate_gan_fixture(directory)
        assert terms["cycle"] > 0.0
        assert terms["cyclegan_total"] == pytest.approx(2 * math.log(2), rel=1e-8)

    def test_explicit_weights_win(self, tmp_path):
        directory = make_gan_fixture(str(tmp_path / "gan"), seed=3)
        save_json({"G": "zero", "F": "identity"}, os.path.join(directory, "mappings.json"))
        terms = evaluate_gan_fixture(directory, GanLossWeights(cycle=0.0, identity=0.0))
        assert terms["cyclegan_total"] == pytest.approx(terms["gan_xy_generator"] + terms["gan_yx_generator"])
