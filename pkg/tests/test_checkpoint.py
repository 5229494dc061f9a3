import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from couette_lowmach.checkpoint import (BadMagicError, CheckpointError,
                                        TruncatedPayloadError, VersionMismatchError,
                                        decode, encode, read_checkpoint,
                                        write_checkpoint)
from couette_lowmach.grid import Grid
from couette_lowmach.params import default_params
from couette_lowmach.solver import PerturbationState, make_initial_data


@pytest.fixture
def state():
    s = make_initial_data(default_params(), Grid(16, 8))
    s.time = 1.234567890123
    return s


def test_round_trip_bitwise(state, tmp_path):
    path = tmp_path / "a.clmc"
    write_checkpoint(state, path)
    back = read_checkpoint(path)
    assert back.time == state.time
    for a, b in zip(state.fields(), back.fields()):
        assert a.tobytes() == b.tobytes()


def test_layout(state):
    data = encode(state)
    assert data[:4] == b"CLMC"
    version, n1, n2, t = struct.unpack_from("<IIId", data, 4)
    assert (version, n1, n2, t) == (1, 16, 8, state.time)
    first = struct.unpack_from("<d", data, 24)[0]
    assert first == state.phi[0, 0]
    # row-major: the second value is phi[0, 1]
    assert struct.unpack_from("<d", data, 32)[0] == state.phi[0, 1]
    assert len(data) == 24 + 4 * 16 * 9 * 8


def test_bad_magic(state):
    data = bytearray(encode(state))
    data[0:4] = b"XXXX"
    with pytest.raises(BadMagicError, match="bad magic"):
        decode(bytes(data))


def test_version_mismatch(state):
    data = bytearray(encode(state))
    struct.pack_into("<I", data, 4, 99)
    with pytest.raises(VersionMismatchError, match="version mismatch"):
        decode(bytes(data))


@pytest.mark.parametrize("cut", [1, 8, 100, 20])
def test_truncated(state, cut, tmp_path):
    data = encode(state)
    path = tmp_path / "t.clmc"
    path.write_bytes(data[:-cut] if cut != 20 else data[:20])
    with pytest.raises(TruncatedPayloadError, match="truncated payload"):
        read_checkpoint(path)


def test_trailing_bytes(state):
    with pytest.raises(CheckpointError, match="trailing"):
        decode(encode(state) + b"\0")


def test_errors_are_distinct():
    kinds = {BadMagicError, VersionMismatchError, TruncatedPayloadError}
    for k in kinds:
        assert issubclass(k, CheckpointError)
        assert not any(issubclass(k, other) for other in kinds - {k})


@given(arrays(np.float64, (4, 8, 9)), st.floats(allow_nan=False))
def test_round_trip_any_values(arr, t):
    s = PerturbationState.from_array(arr, t)
    back = decode(encode(s))
    assert back.as_array().tobytes() == s.as_array().tobytes()
    assert back.time == s.time or (np.isnan(back.time) and np.isnan(s.time))
