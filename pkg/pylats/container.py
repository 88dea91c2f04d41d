__all__ = ['MAGIC', 'VERSION', 'write_container', 'read_container', 'read_header']

# Internal Cell
#exporti
import json
import struct

import numpy as np

from .shared import ContainerError

MAGIC = b'CMLS'
VERSION = 1

# Internal Cell
def _encode_header(meta):
    lines = []
    for key, value in meta.items():
        if '=' in key or '\n' in key:
            raise ContainerError('Error: header key {!r} may not contain "=" or newlines'.format(key))
        lines.append(key + '=' + json.dumps(value, sort_keys=True))
    return ('\n'.join(lines) + '\n').encode('utf-8')


def _decode_header(raw):
    meta = {}
    try:
        text = raw.decode('utf-8')
        for line in text.splitlines():
            if not line:
                continue
            key, value = line.split('=', 1)
            meta[key] = json.loads(value)
    except (UnicodeDecodeError, ValueError) as e:
        raise ContainerError('Error: malformed container header ({})'.format(e))
    return meta

# Cell
def write_container(path, meta, arrays):
    """
    Write a CMLS container: magic, u16 version, u32 header length, key/value header text, then every array
    of `arrays` (a list of (name, ndarray) pairs) as little-endian float32 in the given order.
    """
    meta = dict(meta)
    meta['arrays'] = [[name, [int(n) for n in np.shape(a)]] for name, a in arrays]
    header = _encode_header(meta)
    with open(path, 'wb') as fl:
        fl.write(MAGIC)
        fl.write(struct.pack('<HI', VERSION, len(header)))
        fl.write(header)
        for _, a in arrays:
            fl.write(np.ascontiguousarray(a, dtype='<f4').tobytes())


def _read_prefix(fl, path):
    magic = fl.read(4)
    if magic != MAGIC:
        raise ContainerError('Error: {} is not a CMLS container (magic {!r})'.format(path, magic))
    prefix = fl.read(6)
    if len(prefix) != 6:
        raise ContainerError('Error: {} is truncated inside the prefix'.format(path))
    version, header_len = struct.unpack('<HI', prefix)
    if version != VERSION:
        raise ContainerError('Error: {} has container version {}, this reader understands {}'.format(
            path, version, VERSION))
    raw = fl.read(header_len)
    if len(raw) != header_len:
        raise ContainerError('Error: {} is truncated inside the header'.format(path))
    return _decode_header(raw)

# Cell
def read_header(path):
    with open(path, 'rb') as fl:
        return _read_prefix(fl, path)

# Cell
def read_container(path):
    """
    Read a CMLS container. Returns (meta, {name: float32 ndarray}).
    """
    with open(path, 'rb') as fl:
        meta = _read_prefix(fl, path)
        payload = fl.read()

    if 'arrays' not in meta:
        raise ContainerError('Error: {} header does not list its arrays'.format(path))
    arrays, offset = {}, 0
    for name, shape in meta['arrays']:
        n = int(np.prod(shape)) * 4
        if offset + n > len(payload):
            raise ContainerError('Error: {} is truncated in array {} ({} of {} bytes)'.format(
                path, name, len(payload) - offset, n))
        arrays[name] = np.frombuffer(payload, dtype='<f4', count=n // 4, offset=offset).reshape(shape).astype(np.float32)
        offset += n
    if offset != len(payload):
        raise ContainerError('Error: {} has {} trailing bytes after the last array'.format(path, len(payload) - offset))
    return meta, arrays
