# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend: the length-ordered interval index and hot loops.

This module is the compiled twin of ``_pycore``.  The two must stay
bit-for-bit equivalent: same draw-consumption order, same floating-point
expression order, same tie handling.  Any change here must be mirrored in
``_pycore.py``; see that module for the commented reference implementation.

Layout differs from the pure twin (which uses parallel lists): each
length-treap node is packed into one 64-byte struct and each position-treap
node into 32 bytes, because the step loops are cache-miss bound on large
partitions.  Packing changes where values live, never what is computed.
"""

from libc.math cimport exp, pow, isfinite
from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.stdlib cimport malloc, realloc, free

from .errors import AuditError, DuplicatePointError

BACKEND = "compiled"

SIDE_NONE = 0
SIDE_LEFT = 1
SIDE_RIGHT = 2

AUDIT_TILING_TOL = 1e-9
AUDIT_TOTAL_TOL = 1e-9
AUDIT_INDEX_TOL = 1e-12

ODE_OK = 0
ODE_BLOWUP = 1
ODE_CAPPED = 2

cdef enum:
    MAX_TERMS = 160
    MAX_CAND = 256

ctypedef struct LnNode:          # one 64-byte cache line
    double rec_len
    double sum_all
    double sum_l
    double sum_r
    uint64_t prio
    int32_t ch_l
    int32_t ch_r
    int32_t cnt
    int32_t side
    int64_t pad

ctypedef struct PtNode:          # half a cache line
    double left
    uint64_t prio
    int32_t ch_l
    int32_t ch_r
    int64_t pad


cdef inline uint64_t _mix64_c(uint64_t x) nogil:
    cdef uint64_t z = x + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def _mix64(x):
    return int(_mix64_c(<uint64_t>x))


# --- scalar kernels (twins of psi_model._terms_*) ---------------------------


cdef void _c_terms_eval(Py_ssize_t nt, long* ks, double* ps, double u,
                        double* out_cdf, double* out_pdf, double* out_dpdf) nogil:
    cdef double cdf = 0.0
    cdef double pdf = 0.0
    cdef double dpdf = 0.0
    cdef Py_ssize_t j
    cdef long k, m, i
    cdef double p, acc, u_km1, w1, w_m1
    for j in range(nt):
        k = ks[j]
        p = ps[j]
        if k == 1:
            cdf += p * u
            pdf += p
        elif k >= 2:
            acc = 1.0
            i = 2
            while i < k:
                acc *= u
                i += 1
            u_km1 = acc * u
            cdf += p * (u_km1 * u)
            pdf += p * k * u_km1
            dpdf += p * (k * (k - 1)) * acc
        else:
            m = -k
            w1 = 1.0 - u
            acc = 1.0
            i = 2
            while i < m:
                acc *= w1
                i += 1
            w_m1 = acc * w1
            cdf += p * (1.0 - w_m1 * w1)
            pdf += p * m * w_m1
            dpdf -= p * (m * (m - 1)) * acc
    out_cdf[0] = cdf
    out_pdf[0] = pdf
    out_dpdf[0] = dpdf


cdef double _c_terms_pdf(Py_ssize_t nt, long* ks, double* ps, double u) nogil:
    cdef double pdf = 0.0
    cdef Py_ssize_t j
    cdef long k, m, i
    cdef double p, acc, w1
    for j in range(nt):
        k = ks[j]
        p = ps[j]
        if k == 1:
            pdf += p
        elif k >= 2:
            acc = 1.0
            i = 1
            while i < k:
                acc *= u
                i += 1
            pdf += p * k * acc
        else:
            m = -k
            w1 = 1.0 - u
            acc = 1.0
            i = 1
            while i < m:
                acc *= w1
                i += 1
            pdf += p * m * acc
    return pdf


cdef double _c_terms_ppf(Py_ssize_t nt, long* ks, double* ps, double w) nogil:
    cdef double lo, hi, u, nu, cdf, pdf, dpdf, err
    cdef int it
    if w <= 0.0:
        return 0.0
    if w >= 1.0:
        return 1.0
    lo = 0.0
    hi = 1.0
    u = w
    for it in range(200):
        _c_terms_eval(nt, ks, ps, u, &cdf, &pdf, &dpdf)
        err = cdf - w
        if err < 0.0:
            if -err <= 1e-12:
                return u
            lo = u
        else:
            if err <= 1e-12:
                return u
            hi = u
        if pdf > 0.0:
            nu = u - err / pdf
        else:
            nu = 0.5 * (lo + hi)
        if not (lo < nu and nu < hi):
            nu = 0.5 * (lo + hi)
        if nu == u:
            nu = 0.5 * (lo + hi)
            if nu == u:
                return u
        u = nu
    return 0.5 * (lo + hi)


cdef Py_ssize_t _load_terms(object ks, object ps, long* cks, double* cps) except -1:
    cdef Py_ssize_t nt = len(ks)
    cdef Py_ssize_t j
    if nt > MAX_TERMS:
        raise ValueError(f"too many mixture terms: {nt}")
    if len(ps) != nt:
        raise ValueError("ks and ps lengths differ")
    for j in range(nt):
        cks[j] = ks[j]
        cps[j] = ps[j]
    return nt


# --- buffered draws ----------------------------------------------------------


cdef class _Draws:
    """View over a DrawBuffer; position is synced back on exit."""
    cdef object pybuf
    cdef double[::1] arr
    cdef Py_ssize_t pos, n

    def __cinit__(self, pybuf):
        self.pybuf = pybuf
        self.arr = pybuf.arr
        self.pos = pybuf.pos
        self.n = self.arr.shape[0]

    cdef double next(self):
        cdef double v
        if self.pos >= self.n:
            self.pybuf.refill()
            self.arr = self.pybuf.arr
            self.pos = 0
            self.n = self.arr.shape[0]
        v = self.arr[self.pos]
        self.pos += 1
        return v

    cdef void sync(self):
        self.pybuf.pos = self.pos


# --- interval index ----------------------------------------------------------


cdef class Index:
    cdef public bint has_alpha
    cdef public double alpha_val
    cdef LnNode* ln
    cdef PtNode* pt
    cdef Py_ssize_t cap, n_slots
    cdef Py_ssize_t ln_root, pt_root
    cdef public long long n_points, n_points_alpha, left0, ops, audit_every
    cdef public Py_ssize_t n_initial

    def __cinit__(self, points, alpha):
        cdef Py_ssize_t i, uid, m
        cdef double a, length
        cdef int32_t side
        self.has_alpha = alpha is not None
        self.alpha_val = float(alpha) if alpha is not None else -1.0
        pts = list(points)
        m = len(pts)
        self.cap = 64
        while self.cap < 2 * (m + 1):
            self.cap *= 2
        self.ln = <LnNode*>malloc(self.cap * sizeof(LnNode))
        self.pt = <PtNode*>malloc(self.cap * sizeof(PtNode))
        if self.ln == NULL or self.pt == NULL:
            raise MemoryError("interval index allocation failed")
        self.n_slots = 0
        self.ln_root = -1
        self.pt_root = -1
        self.n_points = 0
        self.n_points_alpha = 0
        self.ops = 0
        self.audit_every = 0
        lefts = [0.0] + pts
        rights = pts + [1.0]
        self.n_initial = m + 1
        self.left0 = 0
        for i in range(self.n_initial):
            a = lefts[i]
            length = rights[i] - a
            if self.has_alpha:
                side = 1 if a < self.alpha_val else 2
            else:
                side = 0
            if side == 1:
                self.left0 += 1
            uid = self._new_slot(a, length, side)
            self.ln_root = self._ln_ins(self.ln_root, uid)
            self.pt_root = self._pt_ins(self.pt_root, uid)

    cdef int _grow(self) except -1:
        cdef Py_ssize_t cap = self.cap * 2
        self.ln = <LnNode*>realloc(self.ln, cap * sizeof(LnNode))
        self.pt = <PtNode*>realloc(self.pt, cap * sizeof(PtNode))
        if self.ln == NULL or self.pt == NULL:
            raise MemoryError("interval index reallocation failed")
        self.cap = cap
        return 0

    def __dealloc__(self):
        free(self.ln)
        free(self.pt)

    # -- slots

    cdef Py_ssize_t _new_slot(self, double left, double length,
                              int32_t side) except -2:
        cdef Py_ssize_t uid = self.n_slots
        cdef uint64_t prio
        if uid >= self.cap:
            self._grow()
        prio = _mix64_c(<uint64_t>uid)
        self.ln[uid].rec_len = length
        self.ln[uid].side = side
        self.ln[uid].prio = prio
        self.ln[uid].ch_l = -1
        self.ln[uid].ch_r = -1
        self.pt[uid].left = left
        self.pt[uid].prio = prio
        self.pt[uid].ch_l = -1
        self.pt[uid].ch_r = -1
        self.n_slots += 1
        self._ln_upd(uid)
        return uid

    # -- counters

    @property
    def n_intervals(self):
        return self.n_slots

    @property
    def left_intervals(self):
        return self.left0 + self.n_points_alpha

    def get_left(self, Py_ssize_t uid):
        if not 0 <= uid < self.n_slots:
            raise IndexError(uid)
        return self.pt[uid].left

    def get_len(self, Py_ssize_t uid):
        if not 0 <= uid < self.n_slots:
            raise IndexError(uid)
        return self.ln[uid].rec_len

    def get_side(self, Py_ssize_t uid):
        if not 0 <= uid < self.n_slots:
            raise IndexError(uid)
        return self.ln[uid].side

    # -- length treap

    cdef void _ln_upd(self, Py_ssize_t t):
        cdef LnNode* nd = &self.ln[t]
        cdef double ln = nd.rec_len
        cdef int32_t sd = nd.side
        cdef double s_all = ln
        cdef double s_l = ln if sd == 1 else 0.0
        cdef double s_r = ln if sd == 2 else 0.0
        cdef int32_t c = 1
        cdef Py_ssize_t l = nd.ch_l
        cdef Py_ssize_t r
        if l != -1:
            s_all += self.ln[l].sum_all
            s_l += self.ln[l].sum_l
            s_r += self.ln[l].sum_r
            c += self.ln[l].cnt
        r = nd.ch_r
        if r != -1:
            s_all += self.ln[r].sum_all
            s_l += self.ln[r].sum_l
            s_r += self.ln[r].sum_r
            c += self.ln[r].cnt
        nd.sum_all = s_all
        nd.sum_l = s_l
        nd.sum_r = s_r
        nd.cnt = c

    cdef bint _ln_less(self, Py_ssize_t a, Py_ssize_t b):
        cdef double la = self.ln[a].rec_len
        cdef double lb = self.ln[b].rec_len
        if la < lb:
            return True
        return la == lb and a < b

    cdef Py_ssize_t _ln_rot_r(self, Py_ssize_t t):
        cdef Py_ssize_t l = self.ln[t].ch_l
        self.ln[t].ch_l = self.ln[l].ch_r
        self.ln[l].ch_r = <int32_t>t
        self._ln_upd(t)
        self._ln_upd(l)
        return l

    cdef Py_ssize_t _ln_rot_l(self, Py_ssize_t t):
        cdef Py_ssize_t r = self.ln[t].ch_r
        self.ln[t].ch_r = self.ln[r].ch_l
        self.ln[r].ch_l = <int32_t>t
        self._ln_upd(t)
        self._ln_upd(r)
        return r

    cdef Py_ssize_t _ln_ins(self, Py_ssize_t t, Py_ssize_t nd):
        if t == -1:
            return nd
        if self._ln_less(nd, t):
            self.ln[t].ch_l = <int32_t>self._ln_ins(self.ln[t].ch_l, nd)
            if self.ln[self.ln[t].ch_l].prio > self.ln[t].prio:
                t = self._ln_rot_r(t)
            else:
                self._ln_upd(t)
        else:
            self.ln[t].ch_r = <int32_t>self._ln_ins(self.ln[t].ch_r, nd)
            if self.ln[self.ln[t].ch_r].prio > self.ln[t].prio:
                t = self._ln_rot_l(t)
            else:
                self._ln_upd(t)
        return t

    cdef Py_ssize_t _ln_del(self, Py_ssize_t t, Py_ssize_t nd) except -2:
        cdef Py_ssize_t l, r
        if t == -1:
            raise AuditError("length index lost a node it should contain")
        if t == nd:
            l = self.ln[t].ch_l
            r = self.ln[t].ch_r
            if l == -1:
                return r
            if r == -1:
                return l
            if self.ln[l].prio > self.ln[r].prio:
                t = self._ln_rot_r(t)
                self.ln[t].ch_r = <int32_t>self._ln_del(self.ln[t].ch_r, nd)
            else:
                t = self._ln_rot_l(t)
                self.ln[t].ch_l = <int32_t>self._ln_del(self.ln[t].ch_l, nd)
            self._ln_upd(t)
            return t
        if self._ln_less(nd, t):
            self.ln[t].ch_l = <int32_t>self._ln_del(self.ln[t].ch_l, nd)
        else:
            self.ln[t].ch_r = <int32_t>self._ln_del(self.ln[t].ch_r, nd)
        self._ln_upd(t)
        return t

    cdef Py_ssize_t _quantile(self, double u):
        cdef Py_ssize_t t = self.ln_root
        cdef double m = u * self.ln[t].sum_all
        cdef Py_ssize_t l, r
        cdef double ls, own
        while True:
            l = self.ln[t].ch_l
            if l != -1:
                ls = self.ln[l].sum_all
                if m <= ls:
                    t = l
                    continue
                m -= ls
            own = self.ln[t].rec_len
            if m <= own:
                return t
            r = self.ln[t].ch_r
            if r == -1:
                return t
            m -= own
            t = r

    def quantile(self, double u):
        return self._quantile(u)

    def sbd(self, double x, int side):
        cdef Py_ssize_t t = self.ln_root
        cdef double acc = 0.0
        cdef Py_ssize_t l
        while t != -1:
            if self.ln[t].rec_len <= x:
                l = self.ln[t].ch_l
                if l != -1:
                    if side == 0:
                        acc += self.ln[l].sum_all
                    elif side == 1:
                        acc += self.ln[l].sum_l
                    else:
                        acc += self.ln[l].sum_r
                if side == 0 or self.ln[t].side == side:
                    acc += self.ln[t].rec_len
                t = self.ln[t].ch_r
            else:
                t = self.ln[t].ch_l
        return acc

    def delta_norm(self, double delta, int side):
        cdef double e = 1.0 - delta
        cdef double s = 0.0
        cdef Py_ssize_t uid
        for uid in range(self.n_slots):
            if side == 0 or self.ln[uid].side == side:
                s += pow(self.ln[uid].rec_len, e)
        return s / delta

    cdef double _max_len(self):
        cdef Py_ssize_t t = self.ln_root
        while self.ln[t].ch_r != -1:
            t = self.ln[t].ch_r
        return self.ln[t].rec_len

    def max_len(self):
        return self._max_len()

    def min_len(self):
        cdef Py_ssize_t t = self.ln_root
        while self.ln[t].ch_l != -1:
            t = self.ln[t].ch_l
        return self.ln[t].rec_len

    cdef Py_ssize_t _longest_uid(self):
        cdef Py_ssize_t t = self.ln_root
        while self.ln[t].ch_r != -1:
            t = self.ln[t].ch_r
        return t

    def longest_uid(self):
        return self._longest_uid()

    cdef Py_ssize_t _cnt_len_lt(self, double x):
        cdef Py_ssize_t t = self.ln_root
        cdef Py_ssize_t c = 0
        cdef Py_ssize_t l
        while t != -1:
            if self.ln[t].rec_len < x:
                l = self.ln[t].ch_l
                if l != -1:
                    c += self.ln[l].cnt
                c += 1
                t = self.ln[t].ch_r
            else:
                t = self.ln[t].ch_l
        return c

    cdef Py_ssize_t _select(self, Py_ssize_t k):
        cdef Py_ssize_t t = self.ln_root
        cdef Py_ssize_t l, lc
        while True:
            l = self.ln[t].ch_l
            lc = self.ln[l].cnt if l != -1 else 0
            if k < lc:
                t = l
            elif k == lc:
                return t
            else:
                k -= lc + 1
                t = self.ln[t].ch_r

    cdef Py_ssize_t _n_tied_longest(self):
        return self.ln[self.ln_root].cnt - self._cnt_len_lt(self._max_len())

    def n_tied_longest(self):
        return self._n_tied_longest()

    cdef Py_ssize_t _tied_longest(self, Py_ssize_t i):
        return self._select(self._cnt_len_lt(self._max_len()) + i)

    def tied_longest(self, Py_ssize_t i):
        return self._tied_longest(i)

    # -- position treap

    cdef Py_ssize_t _pt_ins(self, Py_ssize_t t, Py_ssize_t nd):
        cdef Py_ssize_t l, r
        if t == -1:
            return nd
        if self.pt[nd].left < self.pt[t].left:
            self.pt[t].ch_l = <int32_t>self._pt_ins(self.pt[t].ch_l, nd)
            if self.pt[self.pt[t].ch_l].prio > self.pt[t].prio:
                l = self.pt[t].ch_l
                self.pt[t].ch_l = self.pt[l].ch_r
                self.pt[l].ch_r = <int32_t>t
                t = l
        else:
            self.pt[t].ch_r = <int32_t>self._pt_ins(self.pt[t].ch_r, nd)
            if self.pt[self.pt[t].ch_r].prio > self.pt[t].prio:
                r = self.pt[t].ch_r
                self.pt[t].ch_r = self.pt[r].ch_l
                self.pt[r].ch_l = <int32_t>t
                t = r
        return t

    cdef Py_ssize_t _locate(self, double x):
        cdef Py_ssize_t t = self.pt_root
        cdef Py_ssize_t cand = -1
        while t != -1:
            if self.pt[t].left <= x:
                cand = t
                t = self.pt[t].ch_r
            else:
                t = self.pt[t].ch_l
        return cand

    def locate(self, double x):
        return self._locate(x)

    # -- split

    cdef Py_ssize_t _split_in(self, Py_ssize_t t, double x) except -2:
        cdef double a = self.pt[t].left
        cdef double l, len1, len2
        cdef Py_ssize_t nd
        if x == a:
            return -1
        l = self.ln[t].rec_len
        len1 = x - a
        len2 = l - len1
        if len1 <= 0.0 or len2 <= 0.0:
            return -1
        self.ln_root = self._ln_del(self.ln_root, t)
        self.ln[t].rec_len = len1
        self.ln[t].ch_l = -1
        self.ln[t].ch_r = -1
        self._ln_upd(t)
        self.ln_root = self._ln_ins(self.ln_root, t)
        nd = self._new_slot(x, len2, self.ln[t].side)
        self.ln_root = self._ln_ins(self.ln_root, nd)
        self.pt_root = self._pt_ins(self.pt_root, nd)
        self.n_points += 1
        if self.has_alpha and x < self.alpha_val:
            self.n_points_alpha += 1
        self.ops += 1
        if self.audit_every > 0 and self.ops % self.audit_every == 0:
            self._auto_audit()
        return nd

    def split_in(self, Py_ssize_t t, double x):
        if not 0 <= t < self.n_slots:
            raise IndexError(t)
        return self._split_in(t, x)

    def split(self, double x):
        return self._split_in(self._locate(x), x)

    # -- snapshot / audit

    def fill_snapshot(self, double[::1] lefts, double[::1] lengths,
                      signed char[::1] sides):
        cdef Py_ssize_t* stack = <Py_ssize_t*>malloc(
            (self.n_slots + 1) * sizeof(Py_ssize_t))
        if stack == NULL:
            raise MemoryError("snapshot stack allocation failed")
        cdef Py_ssize_t top = 0
        cdef Py_ssize_t t = self.pt_root
        cdef Py_ssize_t i = 0
        try:
            while top > 0 or t != -1:
                while t != -1:
                    stack[top] = t
                    top += 1
                    t = self.pt[t].ch_l
                top -= 1
                t = stack[top]
                lefts[i] = self.pt[t].left
                lengths[i] = self.ln[t].rec_len
                sides[i] = <signed char>self.ln[t].side
                i += 1
                t = self.pt[t].ch_r
        finally:
            free(stack)

    cdef void _chk(self, Py_ssize_t t, double* o_all, double* o_l, double* o_r,
                   Py_ssize_t* o_c, double* max_err, Py_ssize_t* bad_cnt):
        cdef double la, ll, lr, ra, rl, rr
        cdef Py_ssize_t lc, rc
        cdef double ln, s_all, s_l, s_r, err, e2, e3
        cdef int32_t sd
        cdef Py_ssize_t c
        if t == -1:
            o_all[0] = 0.0
            o_l[0] = 0.0
            o_r[0] = 0.0
            o_c[0] = 0
            return
        self._chk(self.ln[t].ch_l, &la, &ll, &lr, &lc, max_err, bad_cnt)
        self._chk(self.ln[t].ch_r, &ra, &rl, &rr, &rc, max_err, bad_cnt)
        ln = self.ln[t].rec_len
        sd = self.ln[t].side
        s_all = ln + la + ra
        s_l = (ln if sd == 1 else 0.0) + ll + rl
        s_r = (ln if sd == 2 else 0.0) + lr + rr
        c = 1 + lc + rc
        err = abs(self.ln[t].sum_all - s_all)
        e2 = abs(self.ln[t].sum_l - s_l)
        if e2 > err:
            err = e2
        e3 = abs(self.ln[t].sum_r - s_r)
        if e3 > err:
            err = e3
        if err > max_err[0]:
            max_err[0] = err
        if self.ln[t].cnt != c:
            bad_cnt[0] += 1
        o_all[0] = s_all
        o_l[0] = s_l
        o_r[0] = s_r
        o_c[0] = c

    def audit(self):
        cdef double max_tile = 0.0
        cdef Py_ssize_t bad_side = 0
        cdef Py_ssize_t left_cnt = 0
        cdef double s = 0.0
        cdef double comp = 0.0
        cdef double prev_right = 0.0
        cdef Py_ssize_t* stack = <Py_ssize_t*>malloc(
            (self.n_slots + 1) * sizeof(Py_ssize_t))
        if stack == NULL:
            raise MemoryError("audit stack allocation failed")
        cdef Py_ssize_t top = 0
        cdef Py_ssize_t t = self.pt_root
        cdef Py_ssize_t seen = 0
        cdef double a, ln, d, y, tt
        cdef int32_t want
        cdef double max_index_err = 0.0
        cdef Py_ssize_t bad_cnt = 0
        cdef double r_all, r_l, r_r
        cdef Py_ssize_t r_c
        cdef Py_ssize_t mismatch = 0
        cdef double total_err
        try:
            while top > 0 or t != -1:
                while t != -1:
                    stack[top] = t
                    top += 1
                    t = self.pt[t].ch_l
                top -= 1
                t = stack[top]
                a = self.pt[t].left
                ln = self.ln[t].rec_len
                d = abs(a - prev_right)
                if d > max_tile:
                    max_tile = d
                prev_right = a + ln
                y = ln - comp
                tt = s + y
                comp = (tt - s) - y
                s = tt
                if self.has_alpha:
                    want = 1 if a < self.alpha_val else 2
                    if self.ln[t].side != want:
                        bad_side += 1
                    if a < self.alpha_val:
                        left_cnt += 1
                seen += 1
                t = self.pt[t].ch_r
        finally:
            free(stack)
        d = abs(prev_right - 1.0)
        if d > max_tile:
            max_tile = d
        total_err = abs(s - 1.0)
        self._chk(self.ln_root, &r_all, &r_l, &r_r, &r_c,
                  &max_index_err, &bad_cnt)
        if seen != self.n_slots:
            mismatch += 1
        if self.n_slots != self.n_initial + self.n_points:
            mismatch += 1
        if self.has_alpha and left_cnt != self.left0 + self.n_points_alpha:
            mismatch += 1
        if self.ln[self.ln_root].cnt != self.n_slots:
            mismatch += 1
        return (max_tile, total_err, max_index_err, int(bad_cnt),
                int(bad_side), int(mismatch))

    cdef int _auto_audit(self) except -1:
        rep = self.audit()
        if (rep[0] > AUDIT_TILING_TOL or rep[1] > AUDIT_TOTAL_TOL
                or rep[2] > AUDIT_INDEX_TOL or rep[3] or rep[4] or rep[5]):
            raise AuditError(f"periodic audit failed: {rep}")
        return 0

    def corrupt_index(self, double eps):
        # Damage a recorded length (uid 0 = leftmost interval): aggregate
        # repairs propagate the bad length, so the damage survives splits.
        self.ln[0].rec_len += eps


# --- step loops --------------------------------------------------------------


def advance_psi(Index idx, object buf, ks, ps, Py_ssize_t n_steps,
                double[::1] alphas, int64_t[::1] counts):
    cdef long cks[MAX_TERMS]
    cdef double cps[MAX_TERMS]
    cdef Py_ssize_t nt = _load_terms(ks, ps, cks, cps)
    cdef _Draws drw = _Draws(buf)
    cdef Py_ssize_t na = alphas.shape[0]
    cdef Py_ssize_t step, t, nd, j
    cdef double w, u, v, x
    try:
        for step in range(n_steps):
            w = drw.next()
            while w == 0.0:
                w = drw.next()
            u = _c_terms_ppf(nt, cks, cps, w)
            t = idx._quantile(u)
            v = drw.next()
            x = idx.pt[t].left + v * idx.ln[t].rec_len
            nd = idx._split_in(t, x)
            if nd < 0:
                v = drw.next()
                x = idx.pt[t].left + v * idx.ln[t].rec_len
                nd = idx._split_in(t, x)
                if nd < 0:
                    raise DuplicatePointError(
                        f"split point collided twice at x={x!r}")
            for j in range(na):
                if x < alphas[j]:
                    counts[j] += 1
    finally:
        drw.sync()


cdef Py_ssize_t _c_direct_pick(Index idx, _Draws drw, Py_ssize_t k,
                               bint maximize, double* out_x) except -2:
    cdef double xs[MAX_CAND]
    cdef Py_ssize_t uids[MAX_CAND]
    cdef Py_ssize_t tied[MAX_CAND]
    cdef double own[MAX_CAND]
    cdef Py_ssize_t i, j, n_tied, n_own, pick
    cdef double best, li, r, xi
    cdef bint present
    for i in range(k):
        xi = drw.next()
        xs[i] = xi
        uids[i] = idx._locate(xi)
    best = idx.ln[uids[0]].rec_len
    for i in range(1, k):
        li = idx.ln[uids[i]].rec_len
        if (li > best) if maximize else (li < best):
            best = li
    n_tied = 0
    for i in range(k):
        if idx.ln[uids[i]].rec_len == best:
            present = False
            for j in range(n_tied):
                if tied[j] == uids[i]:
                    present = True
                    break
            if not present:
                tied[n_tied] = uids[i]
                n_tied += 1
    if n_tied > 1:
        r = drw.next()
        i = <Py_ssize_t>(r * n_tied)
        if i >= n_tied:
            i = n_tied - 1
        pick = tied[i]
    else:
        pick = tied[0]
    n_own = 0
    for i in range(k):
        if uids[i] == pick:
            own[n_own] = xs[i]
            n_own += 1
    if n_own > 1:
        r = drw.next()
        i = <Py_ssize_t>(r * n_own)
        if i >= n_own:
            i = n_own - 1
        out_x[0] = own[i]
    else:
        out_x[0] = own[0]
    return pick


def advance_direct(Index idx, object buf, Py_ssize_t k, bint maximize,
                   Py_ssize_t n_steps, double[::1] alphas,
                   int64_t[::1] counts):
    if not 1 <= k <= MAX_CAND:
        raise ValueError(f"candidate count {k} outside [1, {MAX_CAND}]")
    cdef _Draws drw = _Draws(buf)
    cdef Py_ssize_t na = alphas.shape[0]
    cdef Py_ssize_t step, nd, j, t
    cdef double x
    try:
        for step in range(n_steps):
            t = _c_direct_pick(idx, drw, k, maximize, &x)
            nd = idx._split_in(t, x)
            if nd < 0:
                t = _c_direct_pick(idx, drw, k, maximize, &x)
                nd = idx._split_in(t, x)
                if nd < 0:
                    raise DuplicatePointError(
                        f"candidate point collided twice at x={x!r}")
            for j in range(na):
                if x < alphas[j]:
                    counts[j] += 1
    finally:
        drw.sync()


def advance_kakutani(Index idx, object buf, Py_ssize_t n_steps,
                     double[::1] alphas, int64_t[::1] counts):
    cdef _Draws drw = _Draws(buf)
    cdef Py_ssize_t na = alphas.shape[0]
    cdef Py_ssize_t step, nd, j, t, c, i, attempt
    cdef double r, v, x
    try:
        for step in range(n_steps):
            nd = -1
            x = 0.0
            for attempt in range(2):
                c = idx._n_tied_longest()
                if c > 1:
                    r = drw.next()
                    i = <Py_ssize_t>(r * c)
                    if i >= c:
                        i = c - 1
                    t = idx._tied_longest(i)
                else:
                    t = idx._longest_uid()
                v = drw.next()
                x = idx.pt[t].left + v * idx.ln[t].rec_len
                nd = idx._split_in(t, x)
                if nd >= 0:
                    break
            if nd < 0:
                raise DuplicatePointError(
                    f"split point collided twice at x={x!r}")
            for j in range(na):
                if x < alphas[j]:
                    counts[j] += 1
    finally:
        drw.sync()


# --- ODE kernel --------------------------------------------------------------


def ode_rk4(ks, ps, double lam, double[::1] grid, double[::1] F,
            double[::1] Fp, double[::1] E, double cap):
    cdef long cks[MAX_TERMS]
    cdef double cps[MAX_TERMS]
    cdef Py_ssize_t nt = _load_terms(ks, ps, cks, cps)
    cdef Py_ssize_t n = grid.shape[0]
    cdef double f = 0.0
    cdef double e = 0.0
    cdef Py_ssize_t i
    cdef double z0, z1, h, zh
    cdef double k1f, k1e, k2f, k2e, k3f, k3e, k4f, k4e
    cdef double e2, f2, e3, f3, e4, f4
    F[0] = 0.0
    E[0] = 0.0
    Fp[0] = lam * grid[0] * exp(-0.0)
    for i in range(1, n):
        z0 = grid[i - 1]
        z1 = grid[i]
        h = z1 - z0
        k1f = lam * z0 * exp(-e)
        k1e = _c_terms_pdf(nt, cks, cps, f)
        zh = z0 + 0.5 * h
        e2 = e + 0.5 * h * k1e
        f2 = f + 0.5 * h * k1f
        k2f = lam * zh * exp(-e2)
        k2e = _c_terms_pdf(nt, cks, cps, f2)
        e3 = e + 0.5 * h * k2e
        f3 = f + 0.5 * h * k2f
        k3f = lam * zh * exp(-e3)
        k3e = _c_terms_pdf(nt, cks, cps, f3)
        e4 = e + h * k3e
        f4 = f + h * k3f
        k4f = lam * z1 * exp(-e4)
        k4e = _c_terms_pdf(nt, cks, cps, f4)
        f = f + (h / 6.0) * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        e = e + (h / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
        if not (isfinite(f) and isfinite(e)):
            return ODE_BLOWUP, i
        F[i] = f
        E[i] = e
        Fp[i] = lam * z1 * exp(-e)
        if f > cap:
            return ODE_CAPPED, i + 1
    return ODE_OK, n
