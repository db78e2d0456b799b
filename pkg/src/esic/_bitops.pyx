# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled bit kernels: LSB-first bit blits and FNV-1a hashing.

Semantics identical to _bitops_py; parity is enforced by tests.
"""

from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_FromStringAndSize
from cpython.bytearray cimport PyByteArray_AS_STRING, PyByteArray_GET_SIZE

BACKEND = "cython"

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def extract_bits(bytes data, Py_ssize_t bit_off, Py_ssize_t nbits):
    if nbits <= 0:
        return b""
    cdef Py_ssize_t out_len = (nbits + 7) >> 3
    cdef bytes out = PyBytes_FromStringAndSize(NULL, out_len)
    cdef unsigned char* dst = <unsigned char*> PyBytes_AS_STRING(out)
    cdef const unsigned char* src = <const unsigned char*> PyBytes_AS_STRING(data)
    cdef Py_ssize_t src_len = len(data)
    cdef Py_ssize_t byte0 = bit_off >> 3
    cdef int shift = bit_off & 7
    cdef Py_ssize_t i, j
    cdef unsigned int cur, nxt
    for i in range(out_len):
        j = byte0 + i
        cur = src[j] if j < src_len else 0
        if shift == 0:
            dst[i] = <unsigned char> cur
        else:
            nxt = src[j + 1] if j + 1 < src_len else 0
            dst[i] = <unsigned char> (((cur >> shift) | (nxt << (8 - shift))) & 0xFF)
    cdef int rem = nbits & 7
    if rem:
        dst[out_len - 1] &= <unsigned char> ((1 << rem) - 1)
    return out


def deposit_bits(bytearray buf, Py_ssize_t bit_off, bytes data, Py_ssize_t nbits):
    if nbits <= 0:
        return
    cdef unsigned char* dst = <unsigned char*> PyByteArray_AS_STRING(buf)
    cdef Py_ssize_t buf_len = PyByteArray_GET_SIZE(buf)
    cdef const unsigned char* src = <const unsigned char*> PyBytes_AS_STRING(data)
    cdef Py_ssize_t n_src = (nbits + 7) >> 3
    cdef Py_ssize_t byte0 = bit_off >> 3
    cdef int shift = bit_off & 7
    cdef int rem = nbits & 7
    cdef Py_ssize_t i, j
    cdef unsigned int b
    for i in range(n_src):
        b = src[i]
        if rem and i == n_src - 1:
            b &= (1 << rem) - 1
        j = byte0 + i
        dst[j] |= <unsigned char> ((b << shift) & 0xFF)
        if shift and j + 1 < buf_len:
            dst[j + 1] |= <unsigned char> (b >> (8 - shift))


def any_bit_set(bytes data, Py_ssize_t bit_off, Py_ssize_t nbits):
    if nbits <= 0:
        return False
    cdef const unsigned char* src = <const unsigned char*> PyBytes_AS_STRING(data)
    cdef Py_ssize_t src_len = len(data)
    cdef Py_ssize_t byte0 = bit_off >> 3
    cdef Py_ssize_t last = (bit_off + nbits - 1) >> 3
    cdef int head = bit_off & 7
    cdef int tail = (bit_off + nbits - 1) & 7
    cdef unsigned int mask
    cdef Py_ssize_t i
    if last >= src_len:  # bits past the end read as zero
        last = src_len - 1
        tail = 7
    for i in range(byte0, last + 1):
        mask = 0xFF
        if i == byte0:
            mask &= (0xFF << head) & 0xFF
        if i == last:
            mask &= 0xFF >> (7 - tail)
        if src[i] & mask:
            return True
    return False


cdef unsigned long long _FNV64_PRIME = 0x100000001B3ULL


def fnv1a64(bytes data, unsigned long long h=0xCBF29CE484222325):
    cdef const unsigned char* p = <const unsigned char*> PyBytes_AS_STRING(data)
    cdef Py_ssize_t n = len(data)
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ p[i]) * _FNV64_PRIME
    return h
