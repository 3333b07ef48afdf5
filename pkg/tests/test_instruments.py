import itertools
import math

import numpy as np
import pytest

from empdist import models
from empdist.errors import DarkStateError, ValidationError
from empdist.instruments import (
    Instrument,
    LindbladSystem,
    dissipator,
    from_kraus,
    gapped_sequence_prob,
    jump_instrument,
    sequence_prob,
    sequence_superop,
)
from empdist.supop import devectorize, identity_covector, vectorize

from reference import random_density, stepwise_sequence_prob

RNG = np.random.default_rng(77)


class TestFromKraus:
    def test_projective_measurement_dephases(self):
        p0 = np.diag([1.0, 0.0])
        p1 = np.diag([0.0, 1.0])
        inst = from_kraus([[p0], [p1]])
        rho = random_density(2, RNG)
        out = devectorize(inst.total @ vectorize(rho))
        assert np.allclose(out, np.diag(np.diag(rho)), atol=1e-14)

    def test_single_identity_kraus(self, caplog):
        inst = from_kraus([[np.eye(2)]], alphabet=("a",))
        assert inst.n_outcomes == 1
        assert np.allclose(inst.total, np.eye(4))

    def test_completeness_violation_reported(self):
        with pytest.raises(ValidationError, match="completeness"):
            from_kraus([[np.eye(2) * 0.9]])

    def test_zero_outcome_flagged_degenerate(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="empdist.instruments"):
            models.amp_damp_qubit(lam=0.0, phi=math.pi)
        assert any("degenerate" in r.message for r in caplog.records)

    def test_trace_preservation_invariant_on_factories(self, zoo):
        for name, inst in zoo.items():
            one = identity_covector(inst.dim)
            assert np.max(np.abs(one @ inst.total - one)) < 1e-10, name


class TestDissipator:
    def test_zero_operator(self):
        assert np.allclose(dissipator(np.zeros((2, 2))), np.zeros((4, 4)))

    def test_two_level_decay(self):
        d = dissipator(models.SIGMA_MINUS)
        excited = np.diag([0.0, 1.0]).astype(complex)
        out = devectorize(d @ vectorize(excited))
        assert np.allclose(out, np.diag([1.0, -1.0]), atol=1e-14)

    def test_trace_annihilation_random(self):
        l = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
        d = dissipator(l)
        one = identity_covector(3)
        assert np.max(np.abs(one @ d)) < 1e-12
        for _ in range(20):
            rho = random_density(3, RNG)
            assert abs(complex(one @ (d @ vectorize(rho)))) < 1e-12


class TestJumpInstrument:
    def test_driven_atom_single_outcome(self, two_level_atom):
        assert two_level_atom.alphabet == ("e",)
        pi = two_level_atom.steady_state
        assert np.max(np.abs(two_level_atom.total @ pi - pi)) < 1e-10

    def test_xx_chain_two_outcomes(self, xx_chain_small):
        assert xx_chain_small.alphabet == ("L-", "R-")
        one = identity_covector(xx_chain_small.dim)
        assert np.max(np.abs(one @ xx_chain_small.total - one)) < 1e-10

    def test_all_jumps_observed_trace_preserving(self):
        inst = models.xx_chain(
            models.XXChainParams(sites=2, observed=("L+", "L-", "R+", "R-"))
        )
        one = identity_covector(inst.dim)
        assert np.max(np.abs(one @ inst.total - one)) < 1e-10

    def test_dark_state_fails_loudly(self):
        # no drive: the ground state never produces a decay click
        system = LindbladSystem(
            hamiltonian=np.zeros((2, 2)), observed={"e": models.SIGMA_MINUS}
        )
        with pytest.raises(DarkStateError):
            jump_instrument(system)


class TestSequenceProbabilities:
    def test_empty_sequence_identity(self, bitflip_half):
        assert np.allclose(sequence_superop(bitflip_half, ()), np.eye(4))

    def test_application_order(self, bitflip_half):
        m0, m1 = bitflip_half.superops
        assert np.allclose(sequence_superop(bitflip_half, ("0", "1")), m1 @ m0)

    def test_single_outcome_marginals(self, bitflip_half):
        assert sequence_prob(bitflip_half, ("1",)) == pytest.approx(1 / 3, abs=1e-12)
        assert sequence_prob(bitflip_half, ("0",)) == pytest.approx(2 / 3, abs=1e-12)

    def test_normalization_over_length_three(self, zoo):
        for name, inst in zoo.items():
            total = sum(
                sequence_prob(inst, seq)
                for seq in itertools.product(inst.alphabet, repeat=3)
            )
            assert abs(total - 1.0) < 1e-9, name

    def test_stepwise_conditional_oracle(self, bitflip_half, amp_damp_generic):
        for inst in (bitflip_half, amp_damp_generic):
            for seq in itertools.product(inst.alphabet, repeat=3):
                direct = sequence_prob(inst, seq)
                chained = stepwise_sequence_prob(inst, seq)
                assert abs(direct - chained) < 1e-12

    def test_even_machine_forbidden_word(self, bitflip_half):
        # zeros come in pairs between ones: "101" never occurs
        assert sequence_prob(bitflip_half, ("1", "0", "1")) == pytest.approx(0.0, abs=1e-12)

    def test_unknown_label(self, bitflip_half):
        with pytest.raises(ValidationError):
            sequence_prob(bitflip_half, ("0", "x"))


class TestGappedSequenceProb:
    def test_contiguous_reduction(self, amp_damp_generic):
        seq = ("0", "1", "0")
        contiguous = sequence_prob(amp_damp_generic, seq)
        gapped = gapped_sequence_prob(amp_damp_generic, list(zip((1, 2, 3), seq)))
        assert abs(contiguous - gapped) < 1e-12

    def test_marginalization_oracle(self, bitflip_half):
        # P(x1, x3) must equal the sum over the middle outcome
        for x1, x3 in itertools.product(bitflip_half.alphabet, repeat=2):
            explicit = sum(
                sequence_prob(bitflip_half, (x1, mid, x3))
                for mid in bitflip_half.alphabet
            )
            gapped = gapped_sequence_prob(bitflip_half, [(1, x1), (3, x3)])
            assert abs(explicit - gapped) < 1e-12

    def test_stationarity_shift_invariance(self, zoo):
        for name, inst in zoo.items():
            x = inst.alphabet[0]
            values = {
                start: gapped_sequence_prob(inst, [(start, x)]) for start in (1, 3, 5)
            }
            spread = max(values.values()) - min(values.values())
            assert spread < 1e-9, (name, values)

    def test_non_increasing_indices_rejected(self, bitflip_half):
        with pytest.raises(ValidationError):
            gapped_sequence_prob(bitflip_half, [(2, "0"), (2, "1")])


class TestInstrumentValidation:
    def test_alphabet_uniqueness(self):
        with pytest.raises(ValidationError):
            Instrument(("a", "a"), [np.eye(4), np.eye(4)], validate=False)

    def test_non_trace_preserving_rejected(self):
        half = 0.5 * np.eye(4)
        with pytest.raises(ValidationError, match="trace preserving"):
            Instrument(("a",), [half])

    def test_choi_positivity_warns_not_fails(self, caplog):
        import logging

        # transpose map: Hermiticity-preserving and trace-preserving but not CP
        d = 2
        transpose = np.zeros((4, 4))
        for i in range(d):
            for j in range(d):
                transpose[i + d * j, j + d * i] = 1.0
        with caplog.at_level(logging.WARNING, logger="empdist.instruments"):
            Instrument(("t",), [transpose])
        assert any("Choi" in r.message for r in caplog.records)

    def test_reference_state_must_be_fixed_point(self, bitflip_half):
        with pytest.raises(ValidationError):
            bitflip_half.with_reference_state(np.diag([1.0, 0.0]))

    def test_json_round_trip_preserves_bits(self, amp_damp_generic):
        import json

        from empdist.serialization import instrument_from_json, instrument_to_json

        blob = json.dumps(instrument_to_json(amp_damp_generic))
        loaded = instrument_from_json(json.loads(blob))
        for a, b in zip(amp_damp_generic.superops, loaded.superops):
            assert np.array_equal(a, b)
