import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from cqcoding.avcq import (
    Avcq,
    DiscreteRandomCode,
    NotSymmetrizable,
    RobustificationPrecondition,
    closest_hull_points,
    compose_cr_code,
    composite_check,
    inner_product_bound,
    is_m_symmetrizable,
    permute_code,
    realize,
    reduce_random_code,
    robustification_check,
    robustify,
    sequence_success,
    symmetrizable_attack,
    type_channels,
    type_success,
    types,
    worst_case_eval,
)
from cqcoding.channel_file import load_fixture
from cqcoding.channels import CqChannel, InputDistribution
from cqcoding.coding import (
    Code,
    Povm,
    all_words_code,
    basis_measurement_code,
    compound_code,
    eval_code,
    first_letter_code,
)
from cqcoding.compound import CompoundSet, compound_capacity, hull_grid
from cqcoding.hypotest import BudgetExceeded, build_test_states
from cqcoding.operators import tensor, tensor_all

from conftest import ONE, PLUS, ZERO, gen, random_channel

NOISELESS = CqChannel.from_states([ZERO, ONE])
SWAP = Avcq((NOISELESS, CqChannel.from_states([ONE, ZERO])))


def avcq_pair():
    return load_fixture("avcq-pair").avcq


def pipeline_code(avcq, l, seed=0):
    cset = CompoundSet(tuple(type_channels(avcq, l)))
    p = InputDistribution.uniform(cset.alphabet)
    s = build_test_states(cset, p, l)
    return compound_code(cset, p, l, s.a / 4, s.a / 4, seed=seed, states=s).code


def brute_min_success(code, avcq):
    rc = code if isinstance(code, DiscreteRandomCode) else DiscreteRandomCode.deterministic(code)
    vals = []
    for s in itertools.product(range(avcq.n_states), repeat=rc.blocklength):
        total = 0.0
        for mu, atom in zip(rc.probs, rc.atoms):
            outs = [tensor_all([avcq[si](xi) for si, xi in zip(s, w)]) for w in atom.codewords]
            total += mu * np.mean([np.trace(o @ d).real for o, d in zip(outs, atom.decoder.elements)])
        vals.append(total)
    return min(vals)


def test_avcq_validation():
    with pytest.raises(ValueError):
        Avcq(())
    with pytest.raises(ValueError):
        Avcq((NOISELESS, CqChannel.from_states([ZERO, ONE, PLUS])))


def test_realize_examples(rng):
    a = Avcq((random_channel(rng, 2, 2), random_channel(rng, 2, 2)))
    np.testing.assert_allclose(realize(a, [1], [0]), a[1](0))
    same = Avcq((NOISELESS, NOISELESS))
    np.testing.assert_allclose(realize(same, [0, 1, 1], [1, 0, 1]), NOISELESS.word_output([1, 0, 1]))
    np.testing.assert_allclose(realize(a, [0, 1], [1, 1]), tensor(a[0](1), a[1](1)))
    with pytest.raises(ValueError):
        realize(a, [0], [0, 1])


def test_worst_case_single_state_is_compound_eval(rng):
    w = random_channel(rng, 2, 2)
    code = pipeline_code(Avcq((w,)), 2)
    wc = worst_case_eval(code, Avcq((w,)))
    assert wc.min_success == pytest.approx(1 - eval_code(code, [w]).worst_avg, abs=1e-12)
    assert wc.n_evaluated == 1 and wc.exhaustive


def test_worst_case_matches_brute_force():
    avcq = avcq_pair()
    code = pipeline_code(avcq, 3)
    wc = worst_case_eval(code, avcq)
    assert wc.n_evaluated == 8
    assert wc.min_success == pytest.approx(brute_min_success(code, avcq), abs=1e-10)
    assert sequence_success(code, avcq, wc.argmin) == pytest.approx(wc.min_success)


def test_worst_case_constant_on_type_classes():
    avcq = avcq_pair()
    rc = robustify(pipeline_code(avcq, 3), avcq)
    by_type: dict = {}
    for s in itertools.product(range(2), repeat=3):
        by_type.setdefault(tuple(sorted(s)), []).append(sequence_success(rc, avcq, s))
    for vals in by_type.values():
        np.testing.assert_allclose(vals, vals[0], atol=1e-10)


def test_worst_case_budget_and_sampling():
    avcq = Avcq(tuple(NOISELESS for _ in range(4)))
    code = first_letter_code(2, 10, 2)
    with pytest.raises(BudgetExceeded):
        worst_case_eval(code, avcq)
    wc = worst_case_eval(code, avcq, sampled=True, n_samples=50, seed=1)
    assert not wc.exhaustive and wc.n_evaluated == 50
    assert wc.min_success == pytest.approx(1.0)


def test_random_code_affine_in_atoms(rng):
    avcq = avcq_pair()
    atoms = [pipeline_code(avcq, 2, seed=k) for k in range(3)]
    atoms = [a for a in atoms if a.size == atoms[0].size]
    w = rng.dirichlet(np.ones(len(atoms)))
    rc = DiscreteRandomCode(tuple(atoms), w)
    for s in itertools.product(range(2), repeat=2):
        per_atom = [sequence_success(a, avcq, s) for a in atoms]
        assert sequence_success(rc, avcq, s) == pytest.approx(w @ per_atom, abs=1e-9)


def test_random_code_validation():
    c1, c2 = first_letter_code(2, 1, 2), first_letter_code(2, 2, 2)
    with pytest.raises(ValueError):
        DiscreteRandomCode((c1, c2), [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteRandomCode((c1,), [0.9])


@pytest.mark.parametrize("l,n", [(2, 2), (3, 2), (2, 3)])
def test_types_enumeration(l, n):
    ts = types(l, n)
    assert len(ts) == math.comb(l + n - 1, n - 1)
    for q in ts:
        assert q.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(q * l, np.round(q * l))


def test_permute_code_moves_letters_and_factors():
    code = first_letter_code(2, 2, 2)
    moved = permute_code(code, [1, 0], 2)
    assert moved.codewords == code.codewords
    # decoder now reads the second letter
    np.testing.assert_allclose(moved.decoder[0], tensor(np.eye(2), ZERO))
    back = permute_code(moved, [1, 0], 2)
    for a, b in zip(back.decoder.elements, code.decoder.elements):
        np.testing.assert_allclose(a, b)


def test_robustify_l1_is_identity():
    avcq = avcq_pair()
    code = all_words_code(2, 1, 2)
    rc = robustify(code, avcq)
    assert len(rc.atoms) == 1
    assert rc.atoms[0].codewords == code.codewords


def test_robustify_collapses_invariant_code():
    code = basis_measurement_code([(0, 0), (1, 1)], {(0, 0): 0, (1, 1): 1}.get, 2)
    rc = robustify(code, avcq_pair())
    assert len(rc.atoms) == 1
    np.testing.assert_allclose(rc.probs, [1.0])


@pytest.mark.parametrize("l", [2, 3, 4])
def test_robustification_inequality_exact(l):
    avcq = avcq_pair()
    code = pipeline_code(avcq, l)
    success, _ = type_success(code, avcq)
    gamma = 1 - success
    rc = robustify(code, avcq, gamma)
    assert len(rc.atoms) <= math.factorial(l)
    chk = robustification_check(code, rc, avcq, gamma)
    assert chk.route_discrepancy <= 1e-9
    assert chk.holds
    assert worst_case_eval(rc, avcq).min_success >= 1 - (l + 1) ** 2 * gamma - 1e-9


def test_robustify_precondition_names_type():
    avcq = avcq_pair()
    code = pipeline_code(avcq, 2)
    success, q = type_success(code, avcq)
    with pytest.raises(RobustificationPrecondition, match="type"):
        robustify(code, avcq, compound_gamma=(1 - success) / 2 - 1e-3)


def test_reduce_single_atom():
    code = first_letter_code(2, 2, 2)
    res = reduce_random_code(DiscreteRandomCode.deterministic(code), SWAP, K=5)
    assert len(res.codes) == 5
    assert all(c is code for c in res.codes)


def test_reduce_identical_atoms_meet_guarantee():
    avcq = avcq_pair()
    code = all_words_code(2, 2, 2)
    rc = DiscreteRandomCode.uniform([code, code])
    res = reduce_random_code(rc, avcq, K=3, seed=4)
    assert res.worst_success == pytest.approx(worst_case_eval(rc, avcq).min_success, abs=1e-12)


def test_reduce_robustified_l3():
    avcq = avcq_pair()
    rc = robustify(pipeline_code(avcq, 3), avcq)
    res = reduce_random_code(rc, avcq, K=9, seed=0)
    assert res.met
    assert res.worst_success >= 1 - 1 / 3
    family = DiscreteRandomCode.uniform(res.codes)
    assert res.worst_success == pytest.approx(brute_min_success(family, avcq), abs=1e-10)


def test_reduce_is_seeded():
    avcq = avcq_pair()
    rc = robustify(pipeline_code(avcq, 3), avcq)
    a = reduce_random_code(rc, avcq, K=4, seed=11)
    b = reduce_random_code(rc, avcq, K=4, seed=11)
    assert [c.codewords for c in a.codes] == [c.codewords for c in b.codes]
    with pytest.raises(ValueError):
        reduce_random_code(rc, avcq, K=0)


def test_compose_single_prefix_word():
    prefix = Code(1, ((0,),), Povm((np.eye(2),)))
    bank = [all_words_code(2, 1, 2)]
    composite = compose_cr_code(prefix, bank)
    assert composite.codewords == ((0, 0), (0, 1))
    chk = composite_check(prefix, bank, avcq_pair())
    assert chk.holds
    assert chk.composite_success == pytest.approx(1 - chk.bank_error, abs=1e-12)


def test_compose_perfect_prefix():
    avcq = avcq_pair()
    prefix = all_words_code(2, 1, 2)
    single = Avcq((avcq[0],))
    bank = [first_letter_code(2, 2, 2)] * 2
    chk = composite_check(prefix, bank, single)
    assert chk.prefix_error == pytest.approx(0.0, abs=1e-12)
    assert 1 - chk.composite_success == pytest.approx(chk.bank_error, abs=1e-12)


def test_compose_l2_m2_exhaustive():
    avcq = avcq_pair()
    prefix = all_words_code(2, 2, 2)
    rc = robustify(first_letter_code(2, 2, 2), avcq)
    bank = reduce_random_code(rc, avcq, prefix.size, seed=0).codes
    chk = composite_check(prefix, bank, avcq)
    assert chk.holds
    assert compose_cr_code(prefix, bank).size == 4 * 2


def test_compose_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        compose_cr_code(all_words_code(2, 1, 2), [first_letter_code(2, 1, 2)])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 20))
def test_inner_product_mean_bound(seed, k):
    r = gen(seed)
    a = 1 - r.random(k) * r.random()
    b = 1 - r.random(k) * r.random()
    assert inner_product_bound(a, b) >= -1e-12


def test_symmetrizable_constant_avcq(rng):
    w = random_channel(rng, 1, 2).outputs[0]
    const = Avcq((CqChannel.from_states([w, w]), CqChannel.from_states([w, w])))
    cert = is_m_symmetrizable(const)
    assert cert.symmetrizable
    assert cert.max_distance <= 1e-9


def test_symmetrizable_swap_pair_witness():
    cert = is_m_symmetrizable(SWAP)
    assert cert.symmetrizable
    w = cert.witnesses[(0, 1)]
    mix_a = sum(p * SWAP[s](0) for s, p in enumerate(w.p))
    mix_b = sum(q * SWAP[s](1) for s, q in enumerate(w.q))
    np.testing.assert_allclose(mix_a, mix_b, atol=1e-9)
    p, q = cert.witness(1, 0)
    np.testing.assert_array_equal(p, w.q)


def test_counterexample_not_symmetrizable():
    avcq = load_fixture("counterexample-cq").avcq
    cert = is_m_symmetrizable(avcq)
    assert not cert.symmetrizable
    expected = np.linalg.norm(ZERO - PLUS)
    assert cert.witnesses[(0, 1)].distance == pytest.approx(expected)
    assert expected**2 > 0.4


def lp_feasible(a, b):
    """Exact oracle: does conv(a) meet conv(b)?"""
    n, m = len(a), len(b)
    rows = [np.concatenate([[x[i, j].real for x in a], [-y[i, j].real for y in b]]) for i in range(a[0].shape[0]) for j in range(a[0].shape[0])]
    rows += [np.concatenate([[x[i, j].imag for x in a], [-y[i, j].imag for y in b]]) for i in range(a[0].shape[0]) for j in range(a[0].shape[0])]
    rows += [np.concatenate([np.ones(n), np.zeros(m)]), np.concatenate([np.zeros(n), np.ones(m)])]
    rhs = np.zeros(len(rows))
    rhs[-2:] = 1
    res = linprog(np.zeros(n + m), A_eq=np.array(rows), b_eq=rhs, bounds=[(0, None)] * (n + m), method="highs")
    return res.status == 0


@pytest.mark.parametrize("seed", range(8))
def test_closest_points_agree_with_lp(seed):
    r = gen(seed)
    n_states = int(r.integers(2, 4))
    a = [random_channel(r, 1, 2).outputs[0] for _ in range(n_states)]
    if seed % 2:
        # force an intersection: a shared mixture
        w = r.dirichlet(np.ones(n_states))
        b = [sum(wi * ai for wi, ai in zip(w, a))] + [random_channel(r, 1, 2).outputs[0] for _ in range(n_states - 1)]
    else:
        b = [random_channel(r, 1, 2).outputs[0] for _ in range(n_states)]
    wit = closest_hull_points(a, b)
    assert (wit.distance <= 1e-6) == lp_feasible(a, b)


def test_attack_on_swap_pair():
    cert = is_m_symmetrizable(SWAP)
    for code in [first_letter_code(2, 1, 2), all_words_code(2, 2, 2), first_letter_code(2, 3, 2)]:
        assert symmetrizable_attack(SWAP, cert, code) <= 0.5 + 1e-9


def test_attack_equal_codewords():
    code = Code(1, ((0,), (0,)), Povm((ZERO, ONE)))
    cert = is_m_symmetrizable(SWAP)
    assert symmetrizable_attack(SWAP, cert, code) <= 0.5 + 1e-9


def test_attack_constant_avcq():
    const = Avcq((CqChannel.from_states([PLUS, PLUS]),))
    cert = is_m_symmetrizable(const)
    assert symmetrizable_attack(const, cert, first_letter_code(2, 2, 2)) <= 0.5 + 1e-9


def test_attack_requires_certificate():
    avcq = load_fixture("counterexample-cq").avcq
    with pytest.raises(NotSymmetrizable):
        symmetrizable_attack(avcq, is_m_symmetrizable(avcq), first_letter_code(2, 1, 2))


def test_dichotomy_signals_on_swap_pair():
    _, hull = hull_grid(list(SWAP.channels), 8)
    assert compound_capacity(hull).value == pytest.approx(0.0, abs=1e-4)
    assert is_m_symmetrizable(SWAP).symmetrizable
    success = []
    for l in (1, 2, 3):
        rc = robustify(first_letter_code(2, l, 2), SWAP)
        success.append(worst_case_eval(rc, SWAP).min_success)
    assert all(s <= 0.5 + 1e-9 for s in success)


def test_random_code_against_mixed_channel_is_affine(rng):
    avcq = avcq_pair()
    rc = robustify(pipeline_code(avcq, 2), avcq)
    q = rng.dirichlet(np.ones(2))
    # success on the i.i.d. mixed channel equals the q^{(x) l} average of sequence successes
    lhs = sum(
        mu * (1 - eval_code(atom, [CqChannel(avcq.alphabet, tuple(sum(qs * ch.outputs[x] for qs, ch in zip(q, avcq.channels)) for x in range(2)))]).worst_avg)
        for mu, atom in zip(rc.probs, rc.atoms)
    )
    rhs = sum(
        np.prod(q[list(s)]) * sequence_success(rc, avcq, s) for s in itertools.product(range(2), repeat=2)
    )
    assert lhs == pytest.approx(rhs, abs=1e-9)
