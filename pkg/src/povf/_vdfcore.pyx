# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled sequential squaring kernel.

Two state types share the interface of ``povf._vdfpure.SquaringState``:
a word-size path for moduli below 2**64 (128-bit intermediate products)
and a GMP path for everything else.
"""

NAME = "compiled"

cdef extern from "gmp.h" nogil:
    ctypedef struct __mpz_struct:
        pass
    ctypedef __mpz_struct mpz_t[1]
    void mpz_init(mpz_t x)
    void mpz_clear(mpz_t x)
    void mpz_set(mpz_t rop, mpz_t op)
    void mpz_set_ui(mpz_t rop, unsigned long op)
    void mpz_mul(mpz_t rop, mpz_t a, mpz_t b)
    void mpz_mul_2exp(mpz_t rop, mpz_t a, unsigned long n)
    void mpz_sub(mpz_t rop, mpz_t a, mpz_t b)
    void mpz_mod(mpz_t r, mpz_t n, mpz_t d)
    int mpz_cmp(mpz_t a, mpz_t b)
    int mpz_sgn(mpz_t a)
    void mpz_import(mpz_t rop, size_t count, int order, size_t size,
                    int endian, size_t nails, const void *op)
    void *mpz_export(void *rop, size_t *countp, int order, size_t size,
                     int endian, size_t nails, mpz_t op)
    size_t mpz_sizeinbase(mpz_t op, int base)

cdef extern from *:
    """
    typedef unsigned long long povf_u64;
    typedef unsigned __int128 povf_u128;

    static inline povf_u64 povf_mulmod(povf_u64 a, povf_u64 b, povf_u64 n) {
        return (povf_u64)(((povf_u128)a * b) % n);
    }

    static void povf_small_rounds(povf_u64 n, povf_u128 l, povf_u64 base,
                                  povf_u64 *x, povf_u64 *pi, povf_u128 *r,
                                  long k) {
        povf_u64 xx = *x, pp = *pi;
        povf_u128 rr = *r;
        for (long i = 0; i < k; i++) {
            rr <<= 1;
            pp = povf_mulmod(pp, pp, n);
            if (rr >= l) {
                rr -= l;
                pp = povf_mulmod(pp, base, n);
            }
            xx = povf_mulmod(xx, xx, n);
        }
        *x = xx; *pi = pp; *r = rr;
    }
    """
    ctypedef unsigned long long povf_u64
    ctypedef unsigned long long povf_u128  # opaque to Cython; C sees __int128
    void povf_small_rounds(povf_u64 n, povf_u128 l, povf_u64 base,
                           povf_u64 *x, povf_u64 *pi, povf_u128 *r, long k) nogil

cdef extern from *:
    """
    static inline unsigned __int128 povf_u128_from_parts(unsigned long long hi,
                                                         unsigned long long lo) {
        return (((unsigned __int128)hi) << 64) | lo;
    }
    static inline unsigned long long povf_u128_hi(unsigned __int128 v) {
        return (unsigned long long)(v >> 64);
    }
    static inline unsigned long long povf_u128_lo(unsigned __int128 v) {
        return (unsigned long long)v;
    }
    """
    povf_u128 povf_u128_from_parts(unsigned long long hi, unsigned long long lo)
    unsigned long long povf_u128_hi(povf_u128 v)
    unsigned long long povf_u128_lo(povf_u128 v)


cdef object _u128_to_int(povf_u128 v):
    return (int(povf_u128_hi(v)) << 64) | int(povf_u128_lo(v))


cdef povf_u128 _int_to_u128(object v):
    return povf_u128_from_parts(<unsigned long long>(v >> 64),
                                <unsigned long long>(v & 0xFFFFFFFFFFFFFFFF))


cdef void _mpz_from_int(mpz_t z, object v):
    cdef bytes data = int(v).to_bytes((int(v).bit_length() + 7) // 8 or 1, "big")
    mpz_import(z, len(data), 1, 1, 1, 0, <const char *>data)


cdef object _mpz_to_int(mpz_t z):
    cdef size_t count = 0
    cdef size_t size
    if mpz_sgn(z) == 0:
        return 0
    size = (mpz_sizeinbase(z, 2) + 7) // 8
    buf = bytearray(size)
    cdef char *p = buf
    mpz_export(p, &count, 1, 1, 1, 0, z)
    return int.from_bytes(bytes(buf[:count]), "big")


cdef class SmallState:
    """Word-size path: modulus < 2**64, proof prime < 2**127."""

    cdef povf_u64 _n, _base, _x, _pi
    cdef povf_u128 _l, _r
    cdef public object rounds

    def __init__(self, modulus, prime, base):
        self._n = modulus
        self._l = _int_to_u128(prime)
        self._base = base
        self._x = base
        self._pi = 1
        self._r = _int_to_u128(1)
        self.rounds = 0

    def advance(self, long k):
        with nogil:
            povf_small_rounds(self._n, self._l, self._base,
                              &self._x, &self._pi, &self._r, k)
        self.rounds += k

    @property
    def x(self):
        return int(self._x)

    @property
    def pi(self):
        return int(self._pi)

    @property
    def r(self):
        return _u128_to_int(self._r)

    def output(self):
        return int(self._x), int(self._pi)


cdef class BigState:
    """GMP path for arbitrary moduli."""

    cdef mpz_t _n, _l, _base, _x, _pi, _r, _tmp
    cdef public object rounds

    def __cinit__(self):
        mpz_init(self._n)
        mpz_init(self._l)
        mpz_init(self._base)
        mpz_init(self._x)
        mpz_init(self._pi)
        mpz_init(self._r)
        mpz_init(self._tmp)

    def __init__(self, modulus, prime, base):
        _mpz_from_int(self._n, modulus)
        _mpz_from_int(self._l, prime)
        _mpz_from_int(self._base, base)
        mpz_set(self._x, self._base)
        mpz_set_ui(self._pi, 1)
        mpz_set_ui(self._r, 1)
        self.rounds = 0

    def __dealloc__(self):
        mpz_clear(self._n)
        mpz_clear(self._l)
        mpz_clear(self._base)
        mpz_clear(self._x)
        mpz_clear(self._pi)
        mpz_clear(self._r)
        mpz_clear(self._tmp)

    def advance(self, long k):
        cdef long i
        with nogil:
            for i in range(k):
                mpz_mul_2exp(self._r, self._r, 1)
                mpz_mul(self._tmp, self._pi, self._pi)
                mpz_mod(self._pi, self._tmp, self._n)
                if mpz_cmp(self._r, self._l) >= 0:
                    mpz_sub(self._r, self._r, self._l)
                    mpz_mul(self._tmp, self._pi, self._base)
                    mpz_mod(self._pi, self._tmp, self._n)
                mpz_mul(self._tmp, self._x, self._x)
                mpz_mod(self._x, self._tmp, self._n)
        self.rounds += k

    @property
    def x(self):
        return _mpz_to_int(self._x)

    @property
    def pi(self):
        return _mpz_to_int(self._pi)

    @property
    def r(self):
        return _mpz_to_int(self._r)

    def output(self):
        return _mpz_to_int(self._x), _mpz_to_int(self._pi)


def new_state(modulus, prime, base):
    if modulus < (1 << 64) and prime < (1 << 127):
        return SmallState(modulus, prime, base)
    return BigState(modulus, prime, base)
