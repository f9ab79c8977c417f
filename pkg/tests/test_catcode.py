from __future__ import annotations

import math

import numpy as np
import pytest

from catqec.catcode import (
    CARDINALS,
    CatCodeParams,
    CodewordState,
    LogicalQubit,
    apply_logical_jump,
    basis_overlaps,
    bloch_of,
    code_basis,
    decode_ideal,
    density_from_bloch,
    depolarize,
    depolarizing_retention,
    encode_ideal,
    jump_branch,
    kerr_frame_estimate,
    logical_rotation,
    unitary_codec_retention,
    z_rotation,
)
from catqec.dynamics import kerr_unitary
from catqec.errors import LeakageError
from catqec.fock import cat_state, ladder_ops, parity_op, phase_rotation

K = 2 * math.pi * 0.0045


def random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return LogicalQubit(v[0], v[1])


def overlap_fidelity(q: LogicalQubit, r: LogicalQubit) -> float:
    return abs(np.vdot(q.vector, r.vector)) ** 2


def test_logical_qubit_normalizes():
    q = LogicalQubit(3, 4j)
    assert abs(q.c0) ** 2 + abs(q.c1) ** 2 == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        LogicalQubit(0, 0)


def test_cardinal_bloch_vectors():
    expected = {"+z": (0, 0, 1), "-z": (0, 0, -1), "+x": (1, 0, 0), "-x": (-1, 0, 0),
                "+y": (0, 1, 0), "-y": (0, -1, 0)}
    for name, r in expected.items():
        assert np.allclose(CARDINALS[name].bloch(), r, atol=1e-12)
        assert np.allclose(LogicalQubit.from_bloch(r).bloch(), r, atol=1e-12)
    assert np.allclose(bloch_of(density_from_bloch([0.1, -0.2, 0.3])), [0.1, -0.2, 0.3])


def test_encode_pole_is_even_cat():
    p = CatCodeParams()
    psi = encode_ideal(LogicalQubit(1, 0), p)
    assert np.allclose(psi, cat_state(p.alpha0, 1, p.dim), atol=1e-12)


def test_encode_equator_is_four_cat():
    p = CatCodeParams()
    psi = encode_ideal(CARDINALS["+x"], p)
    off = np.arange(p.dim) % 4 != 0
    assert np.sum(np.abs(psi[off]) ** 2) < 1e-20


def test_encoded_states_are_even():
    rng = np.random.default_rng(1)
    p = CatCodeParams()
    P = parity_op(p.dim)
    for _ in range(10):
        psi = encode_ideal(random_qubit(rng), p)
        assert np.vdot(psi, P @ psi).real == pytest.approx(1.0, abs=1e-12)


def test_roundtrip_random_qubits():
    rng = np.random.default_rng(2)
    p = CatCodeParams()
    s = CodewordState(p.alpha0)
    for _ in range(100):
        q = random_qubit(rng)
        out, leak = decode_ideal(encode_ideal(q, p), s, p)
        assert overlap_fidelity(q, out) > 1 - 1e-10
        assert leak < 1e-10


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_exact_jumps_are_quarter_turns(k):
    # oracle: apply the Fock-space lowering operator directly
    p = CatCodeParams(nbar0=2.0, kappa_s=0.0, K_s=0.0)
    a = ladder_ops(p.dim)[0]
    rng = np.random.default_rng(10 + k)
    q = random_qubit(rng)
    psi = encode_ideal(q, p)
    s = CodewordState(p.alpha0)
    for _ in range(k):
        psi = a @ psi
        s = apply_logical_jump(s, s.elapsed)
    psi /= np.linalg.norm(psi)
    out, leak = decode_ideal(psi, s, p)
    expected = logical_rotation(s) @ q.vector
    assert np.allclose(out.bloch(), bloch_of(np.outer(expected, expected.conj())), atol=1e-6)
    assert np.allclose(logical_rotation(s), np.diag([1, 1j ** k]))
    # the lowered truncation tail leaves a tiny residual outside the code space
    assert leak < 1e-8


def test_single_jump_gives_i_c1():
    p = CatCodeParams(kappa_s=0.0, K_s=0.0)
    q = LogicalQubit(0.6, 0.8)
    psi = ladder_ops(p.dim)[0] @ encode_ideal(q, p)
    s = apply_logical_jump(CodewordState(p.alpha0), 0.0)
    out, _ = decode_ideal(psi / np.linalg.norm(psi), s, p)
    phase = out.c0 / abs(out.c0)
    assert np.allclose(np.array([out.c0, out.c1]) / phase, [0.6, 0.8j], atol=1e-10)


def test_jump_on_pole_keeps_ray():
    s = apply_logical_jump(CodewordState(math.sqrt(2)), 5.0)
    assert s.parity == -1 and s.error_count == 1 and s.jump_times == (5.0,)
    v = logical_rotation(s) @ np.array([1, 0])
    assert np.allclose(v, [1, 0])


def test_four_jumps_identity():
    s = CodewordState(math.sqrt(2))
    for t in (1.0, 2.0, 3.0, 4.0):
        s = apply_logical_jump(s, t)
    assert s.parity == 1
    assert np.allclose(logical_rotation(s), np.eye(2))


def test_jump_time_must_not_precede_elapsed():
    s = CodewordState(1.0, elapsed=10.0)
    with pytest.raises(ValueError):
        apply_logical_jump(s, 5.0)


def test_codeword_invariants():
    with pytest.raises(ValueError):
        CodewordState(1.0, parity=-1, error_count=0)
    with pytest.raises(ValueError):
        CodewordState(1.0, frame_angle=float("nan"))
    assert CodewordState(1.0, frame_angle=7.0).frame_angle == pytest.approx(7.0 - 2 * math.pi)


def test_kerr_jump_frame_is_undone_by_decoder():
    # exact Kerr evolution with one jump at t_j: the decoder needs frame K t_j
    p = CatCodeParams(kappa_s=0.0, K_s=K)
    q = LogicalQubit(0.8, 0.6j)
    T, t_j = 60.0, 23.0
    a = ladder_ops(p.dim)[0]
    psi = kerr_unitary(K, T - t_j, p.dim) @ (a @ (kerr_unitary(K, t_j, p.dim) @ encode_ideal(q, p)))
    psi /= np.linalg.norm(psi)
    s = apply_logical_jump(CodewordState(p.alpha0), t_j, K).advanced(T - t_j)
    out, leak = decode_ideal(psi, s, p)
    expected = z_rotation(1) @ q.vector
    assert overlap_fidelity(out, LogicalQubit(*expected)) > 1 - 1e-9
    assert leak < 1e-9


def test_amplitude_unchanged_by_jumps():
    p = CatCodeParams(nbar0=2.0, kappa_s=1 / 250, K_s=0.0)
    t = 80.0
    for k in range(4):
        psi = jump_branch(encode_ideal(CARDINALS["+x"], p), k, p.kappa_s, t)
        psi /= np.linalg.norm(psi)
        s = CodewordState(p.alpha0, elapsed=t, parity=(-1) ** k, error_count=k)
        _, leak = decode_ideal(psi, s, p)
        assert leak < 1e-10


def test_frame_error_leakage_is_quadratic():
    p = CatCodeParams(K_s=0.0, kappa_s=0.0)
    psi = encode_ideal(CARDINALS["+x"], p)
    s = CodewordState(p.alpha0)
    leaks = []
    for theta in (0.0, 0.01, 0.02, 0.04):
        _, leak = decode_ideal(phase_rotation(theta, p.dim) @ psi, s, p)
        leaks.append(leak)
    assert leaks[0] < 1e-12
    assert leaks[1] < leaks[2] < leaks[3]
    assert leaks[2] / leaks[1] == pytest.approx(4.0, rel=0.01)


def test_frame_error_lowers_decoded_fidelity():
    # leaked population is counted as fully mixed
    p = CatCodeParams(K_s=0.0, kappa_s=0.0)
    s = CodewordState(p.alpha0)
    fids = []
    for deg in (0, 10, 20, 30):
        total = 0.0
        for name in ("+x", "+y"):
            q = CARDINALS[name]
            psi = phase_rotation(math.radians(deg), p.dim) @ encode_ideal(q, p)
            out, leak = decode_ideal(psi, s, p)
            total += (1 - leak) * overlap_fidelity(q, out) + 0.5 * leak
        fids.append(total / 2)
    assert fids[0] == pytest.approx(1.0, abs=1e-10)
    assert all(x > y for x, y in zip(fids, fids[1:]))


def test_wrong_parity_decode_reports_leakage():
    p = CatCodeParams()
    psi = encode_ideal(CARDINALS["+x"], p)
    with pytest.raises(LeakageError):
        decode_ideal(psi, CodewordState(p.alpha0, parity=-1, error_count=1), p, leakage_bound=0.5)


def test_basis_overlaps_closed_form_vs_brute_force():
    alpha = math.sqrt(2)
    even, odd = basis_overlaps(alpha)
    be = abs(np.vdot(cat_state(alpha, 1, 20), cat_state(1j * alpha, 1, 20))) ** 2
    bo = abs(np.vdot(cat_state(alpha, -1, 20), cat_state(1j * alpha, -1, 20))) ** 2
    assert even == pytest.approx(be, abs=1e-9)
    assert odd == pytest.approx(bo, abs=1e-9)
    b = code_basis(alpha, 1, 20)
    assert abs(b[:, 0] @ b[:, 1].conj()) ** 2 == pytest.approx(even, abs=1e-9)


def test_basis_overlaps_limits():
    even, _ = basis_overlaps(math.sqrt(math.pi / 2))
    assert even < 1e-25
    big = basis_overlaps(4.0)
    assert max(big) < 1e-12
    with pytest.raises(ValueError):
        basis_overlaps(0.0)


def test_kerr_frame_estimate():
    tw = 13.8
    assert kerr_frame_estimate([], tw, K) == 0.0
    assert kerr_frame_estimate([1], tw, K) == pytest.approx(K * tw / 2)
    assert kerr_frame_estimate([3], tw, K) == pytest.approx(5 * K * tw / 2)
    assert kerr_frame_estimate([1, 3], tw, K) == pytest.approx(3 * K * tw)
    uneven = kerr_frame_estimate([2], 0.0, K, step_durations=[10.0, 30.0])
    assert uneven == pytest.approx(K * 25.0)
    with pytest.raises(ValueError):
        kerr_frame_estimate([0], tw, K)


def test_depolarize_helpers():
    rho = CARDINALS["+z"].density()
    out = depolarize(rho, 0.5)
    assert np.allclose(bloch_of(out), [0, 0, 0.5])
    assert depolarizing_retention(0.03) == pytest.approx(0.96)


def test_unitary_codec_retention():
    assert unitary_codec_retention(2.0, 1 / 250, 0.0, 0) == pytest.approx(1.0, abs=1e-9)
    even = unitary_codec_retention(2.0, 1 / 250, 100.0, 0)
    odd = unitary_codec_retention(2.0, 1 / 250, 100.0, 1)
    early = unitary_codec_retention(2.0, 1 / 250, 30.0, 0)
    assert 0.9 < odd < even < early < 1.0
