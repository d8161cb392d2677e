"""Exact theory evaluation: instrument families, joint probabilities, spans."""
from __future__ import annotations

import math

import numpy as np
import pytest

from causaloid import (
    BackendError,
    Chain,
    ClassicalSpec,
    ProcedureSpec,
    QuantumSpec,
    Region,
    build_prob_table,
    complete_effect,
    conditioning_span,
    deterministic_family,
    enumerate_exteriors,
    enumerate_labels,
    full_pack,
    ic_effects,
    ic_preparations,
    joint_prob,
    kernel_family,
    polariser_family,
    probe_reprepare_family,
    probe_reset_family,
    validate_exterior_span,
)
from causaloid.errors import SpanDeficient, UnknownProcedure
from causaloid.tables import ExteriorConfiguration


def cos2(deg: float) -> float:
    return math.cos(math.radians(deg)) ** 2


def _polariser_spec(angle_lists):
    locations = tuple(range(1, len(angle_lists) + 1))
    return QuantumSpec(
        chains=(Chain("photon", 2, locations),),
        instruments=tuple(
            polariser_family(x, a) for x, a in zip(locations, angle_lists)
        ),
        preparations=(ic_preparations("quantum", 2),),
        effects=(ic_effects("quantum", 2) + (complete_effect("quantum", 2),),),
        conditioning_actions=(),
    )


def test_polariser_family_shape():
    fam = polariser_family(1, [0, 30, 60, 90])
    assert fam.n_actions == 4
    assert all(fam.n_outcomes(a) == 2 for a in range(4))
    assert fam.labels() == [(a, s) for a in range(4) for s in range(2)]
    with pytest.raises(UnknownProcedure):
        fam.n_outcomes(4)


def test_probe_families_sizes():
    assert probe_reprepare_family(1, 2).n_actions == 16
    assert probe_reprepare_family(1, 3).n_actions == 81
    fam = probe_reset_family(1, 3)
    assert fam.n_actions == 3 and fam.n_outcomes(0) == 3


def test_classical_kernels_must_be_stochastic():
    bad = kernel_family(1, 2, [[np.array([[0.5, 0.0], [0.0, 0.5]])]])
    with pytest.raises(BackendError):
        ClassicalSpec(
            chains=(Chain("wire", 2, (1,)),),
            instruments=(bad,),
            preparations=(ic_preparations("classical", 2),),
            effects=(ic_effects("classical", 2),),
            conditioning_actions=(),
        )


def test_deterministic_family_maps():
    fam = deterministic_family(1, 3, ["identity", "cycle", "reset:2", "uniform"])
    assert fam.n_actions == 4
    with pytest.raises(BackendError):
        deterministic_family(1, 3, ["spin"])


def test_label_enumeration_is_sorted():
    spec = _polariser_spec([[0, 30], [0, 45]])
    gamma = enumerate_labels(spec, Region((1, 2)))
    assert gamma.size == 16
    assert list(gamma.labels) == sorted(gamma.labels)
    assert gamma.labels[0] == ((0, 0), (0, 0))
    assert gamma.index_of(((1, 1), (0, 1))) == gamma.labels.index(((1, 1), (0, 1)))


def test_exterior_enumeration_counts():
    spec = _polariser_spec([[0, 30], [0, 45]])
    # probing location 1 folds location 2 into the exterior as conditioning
    exts = enumerate_exteriors(spec, [1])
    n_prep = len(spec.preparations[0])
    n_eff = len(spec.effects[0])
    n_cond = sum(spec.family(2).n_outcomes(a) for a in range(spec.family(2).n_actions))
    assert len(exts) == n_prep * n_eff * n_cond
    assert all(ext.conditioning and ext.conditioning[0][0] == 2 for ext in exts)


def test_malus_chain_joint_probability():
    # pass through 0, 30, 60 degrees from a horizontal photon, then discard
    spec = _polariser_spec([[0, 30, 60, 90], [0, 30, 45, 60], [0, 30, 60, 90]])
    assignment = {
        Region((1,)): ((0,), (0,)),
        Region((2,)): ((1,), (0,)),
        Region((3,)): ((2,), (0,)),
    }
    ext = ExteriorConfiguration((0,), (len(spec.effects[0]) - 1,), (), True)
    p = joint_prob(spec, assignment, ext)
    assert p == pytest.approx(cos2(30) * cos2(30), abs=1e-12)


def _coin_family(location):
    # fair coin: both outcomes equally likely, post-state equals the outcome
    t0 = np.array([[0.5, 0.5], [0.0, 0.0]])
    t1 = np.array([[0.0, 0.0], [0.5, 0.5]])
    return kernel_family(location, 2, [(t0, t1)], ["coin"])


def _one_chain_spec(name, location):
    return ClassicalSpec(
        chains=(Chain(name, 2, (location,)),),
        instruments=(_coin_family(location),),
        preparations=(ic_preparations("classical", 2),),
        effects=(ic_effects("classical", 2),),
        conditioning_actions=(),
    )


def test_joint_prob_factorizes_across_chains():
    both = ClassicalSpec(
        chains=(Chain("left", 2, (1,)), Chain("right", 2, (2,))),
        instruments=(_coin_family(1), _coin_family(2)),
        preparations=(ic_preparations("classical", 2), ic_preparations("classical", 2)),
        effects=(ic_effects("classical", 2), ic_effects("classical", 2)),
        conditioning_actions=(),
    )
    lab0, lab1 = ((0,), (0,)), ((0,), (1,))
    one = ExteriorConfiguration((0,), (0,), (), False)
    left = joint_prob(_one_chain_spec("left", 1), {Region((1,)): lab0}, one)
    right = joint_prob(_one_chain_spec("right", 2), {Region((2,)): lab1}, one)
    assert left == pytest.approx(0.5, abs=1e-12)  # coin 0, then effect read0
    assert right == pytest.approx(0.0, abs=1e-12)  # coin 1 leaves 1, read0 fails
    ext = ExteriorConfiguration((0, 0), (0, 0), (), False)
    joint = joint_prob(both, {Region((1,)): lab0, Region((2,)): lab1}, ext)
    assert joint == pytest.approx(left * right, abs=1e-12)
    right_ok = joint_prob(_one_chain_spec("right", 2),
                          {Region((2,)): lab1},
                          ExteriorConfiguration((0,), (1,), (), False))
    assert right_ok == pytest.approx(0.5, abs=1e-12)
    ext2 = ExteriorConfiguration((0, 0), (0, 1), (), False)
    joint2 = joint_prob(both, {Region((1,)): lab0, Region((2,)): lab1}, ext2)
    assert joint2 == pytest.approx(left * right_ok, abs=1e-12) == 0.25


def test_prob_table_matches_pointwise_oracle(scenarios):
    s = scenarios("classical_chain3")
    table = build_prob_table(s.spec, s.regions)
    rng = np.random.default_rng(404)
    for _ in range(50):
        idx = tuple(rng.integers(0, g.size) for g in table.gammas)
        e = int(rng.integers(0, len(table.exteriors)))
        labels = [g.labels[i] for g, i in zip(table.gammas, idx)]
        direct = joint_prob(
            s.spec, dict(zip(table.regions, labels)), table.exteriors[e]
        )
        assert table.values[idx + (e,)] == pytest.approx(direct, abs=1e-12)


def test_span_validation_ranks(scenarios):
    s = scenarios("qubit_channel")
    v = validate_exterior_span(s.spec, s.regions[0])
    assert (v.rank, v.extended_rank, v.stable) == (16, 16, True)


def test_span_deficiency_is_loud():
    # a single preparation/effect pair cannot span a qubit channel's exterior
    spec = QuantumSpec(
        chains=(Chain("photon", 2, (1,)),),
        instruments=(probe_reprepare_family(1, 2),),
        preparations=((ic_preparations("quantum", 2)[0],),),
        effects=((complete_effect("quantum", 2),),),
        conditioning_actions=(),
    )
    with pytest.raises(SpanDeficient):
        validate_exterior_span(spec, Region((1,)))


def test_conditioning_span_flags():
    classical = ClassicalSpec(
        chains=(Chain("tape", 2, (1,)),),
        instruments=(probe_reset_family(1, 2),),
        preparations=(ic_preparations("classical", 2),),
        effects=(ic_effects("classical", 2),),
        conditioning_actions=(),
    )
    dim, full = conditioning_span(classical, 1)
    assert (dim, full) == (4, 4)
    quantum = _polariser_spec([[0, 30, 60, 90]])
    dim, full = conditioning_span(quantum, 1)
    assert full == 16 and dim < full


def test_full_pack_from_spec():
    spec = _polariser_spec([[0, 30], [0, 45, 90]])
    pack = full_pack(spec)
    assert pack.locations == (1, 2)
    assert pack.n_actions(1) == 2 and pack.n_actions(2) == 3
    assert pack.n_outcomes(2, 1) == 2
