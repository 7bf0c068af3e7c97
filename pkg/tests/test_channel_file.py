import json

import numpy as np
import pytest

from cqcoding.channel_file import (
    FIXTURES,
    ChannelFileError,
    channel_file_document,
    dumps_channel_file,
    load_channel_file,
    load_fixture,
    parse_channel_file,
    parse_matrix,
)
from cqcoding.channels import CqChannel
from cqcoding.zero_error import damping_channel

from conftest import ONE, PLUS, ZERO

PAIR = [[1.0, 0.0], [0.0, 0.0]]


def doc(**overrides):
    base = {
        "alphabet": ["0", "1"],
        "dim": 2,
        "channels": {"A": {"0": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]], "1": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]}},
    }
    base.update(overrides)
    return base


@pytest.mark.parametrize("name", FIXTURES)
def test_every_fixture_loads(name):
    cf = load_fixture(name)
    assert cf.channels or cf.kraus is not None


def test_fixture_contents():
    cx = load_fixture("counterexample-cq").channels[0]
    np.testing.assert_allclose(cx(0), ZERO, atol=1e-15)
    np.testing.assert_allclose(cx(1), PLUS, atol=1e-15)
    kr = load_fixture("counterexample-kraus")
    assert kr.damping_x == 0.9
    for a, b in zip(kr.kraus.kraus_ops, damping_channel(0.9).kraus_ops):
        np.testing.assert_allclose(a, b, atol=1e-15)
    assert len(load_fixture("swap-pair").channels) == 2


def test_parse_minimal_document():
    cf = parse_channel_file(doc())
    assert cf.states == ("A",)
    np.testing.assert_allclose(cf.channels[0](1), ONE)
    assert cf.avcq.n_states == 1


def test_flat_matrix_accepted():
    m = parse_matrix([[0.5, 0], [0, 0.5], [0, -0.5], [0.5, 0]], 2, "m")
    np.testing.assert_allclose(m, [[0.5, 0.5j], [-0.5j, 0.5]])


@pytest.mark.parametrize(
    "bad,path",
    [
        (doc(dim=0), "dim"),
        (doc(alphabet="01"), "alphabet"),
        (doc(alphabet=["0", "0"]), "alphabet"),
        (doc(channels={"A": {"0": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}}), "channels.A"),
        (doc(channels={"A": {"0": [[[1, 0]]], "1": [[[1, 0]]]}}), "channels.A.0"),
        (doc(channels={"A": {"0": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]], "1": [[[1, 0], "x"], [[0, 0], [0, 0]]]}}), "channels.A.1[0][1]"),
        (doc(channels={"A": {"0": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]], "1": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}}), "channels.A.0"),
        (doc(channels={"A": {"0": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]], "1": [[[2, 0], [0, 0]], [[0, 0], [-1, 0]]]}}), "channels.A.1"),
        (doc(kraus=[[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]]), "kraus"),
        (doc(damping_x="high"), "damping_x"),
        ({"dim": 2}, "$"),
        ([1, 2], "$"),
    ],
)
def test_errors_name_the_path(bad, path):
    with pytest.raises(ChannelFileError) as info:
        parse_channel_file(bad)
    assert info.value.path == path
    assert str(info.value).startswith(f"{path}: ")


def test_load_errors(tmp_path):
    with pytest.raises(ChannelFileError, match="missing.json"):
        load_channel_file(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ChannelFileError, match="line 1"):
        load_channel_file(broken)


def test_avcq_needs_channels():
    cf = parse_channel_file(channel_file_document(kraus=damping_channel(0.5)))
    with pytest.raises(ChannelFileError, match="channels"):
        cf.avcq


def test_roundtrip(tmp_path, rng):
    from conftest import random_channel

    chans = [random_channel(rng, 3, 2) for _ in range(2)]
    text = dumps_channel_file(channel_file_document(chans, states=["s", "t"], alphabet=["a", "b", "c"]))
    path = tmp_path / "rt.json"
    path.write_text(text, encoding="utf-8")
    cf = load_channel_file(path)
    assert cf.states == ("s", "t") and cf.alphabet == ("a", "b", "c")
    for a, b in zip(cf.channels, chans):
        for x in range(3):
            np.testing.assert_array_equal(a(x), b(x))
    assert json.loads(text) == channel_file_document(chans, states=["s", "t"], alphabet=["a", "b", "c"])


def test_dumps_keeps_one_row_per_line():
    text = dumps_channel_file(channel_file_document([CqChannel.from_states([ZERO, ONE])]))
    assert '[[1.0, 0.0], [0.0, 0.0]]' in text
