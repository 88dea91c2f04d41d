import numpy as np
import pytest

from pylats.container import write_container, read_container, read_header, MAGIC
from pylats.shared import ContainerError


def test_round_trip(tmp_path, rng):
    a = rng.standard_normal((3, 4)).astype(np.float32)
    b = np.arange(5, dtype=np.float32)
    path = tmp_path / 'x.cmls'
    write_container(path, {'kind': 'test', 'grid': {'extents': [3, 4]}}, [('a', a), ('b', b)])
    meta, arrays = read_container(path)
    assert meta['kind'] == 'test'
    assert meta['grid'] == {'extents': [3, 4]}
    np.testing.assert_array_equal(arrays['a'], a)
    np.testing.assert_array_equal(arrays['b'], b)
    assert arrays['a'].dtype == np.float32


def test_header_alone(tmp_path):
    path = tmp_path / 'x.cmls'
    write_container(path, {'n_steps': 7}, [('u', np.zeros((7, 2)))])
    meta = read_header(path)
    assert meta['n_steps'] == 7
    assert meta['arrays'] == [['u', [7, 2]]]


def test_bad_magic(tmp_path):
    path = tmp_path / 'x.cmls'
    write_container(path, {}, [('u', np.ones(3))])
    raw = bytearray(path.read_bytes())
    raw[:4] = b'XXXX'
    path.write_bytes(bytes(raw))
    with pytest.raises(ContainerError, match='not a CMLS'):
        read_container(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / 'x.cmls'
    write_container(path, {}, [('u', np.ones(10))])
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ContainerError, match='truncated'):
        read_container(path)


def test_wrong_version(tmp_path):
    path = tmp_path / 'x.cmls'
    write_container(path, {}, [('u', np.ones(1))])
    raw = bytearray(path.read_bytes())
    raw[len(MAGIC)] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(ContainerError, match='version'):
        read_container(path)


def test_bad_key(tmp_path):
    with pytest.raises(ContainerError):
        write_container(tmp_path / 'x.cmls', {'a=b': 1}, [])
