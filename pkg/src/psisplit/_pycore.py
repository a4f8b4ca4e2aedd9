"""Pure-Python backend: the length-ordered interval index and hot loops.

This module is the reference twin of the compiled extension ``_core``.  The
two must stay bit-for-bit equivalent: same draw-consumption order, same
floating-point expression order, same tie handling.  Any change here must be
mirrored in ``_core.pyx``.

The index keeps every interval of the current partition of [0, 1] in two
treaps sharing one node id space (the record id, "uid"):

* a position treap keyed by left endpoint (insert-only; a split keeps the
  old record for the left child and appends one new record), and
* a length treap keyed by (length, uid), augmented with subtree length sums
  (total / left-of-alpha / right-of-alpha) and subtree node counts.

Node priorities are splitmix64 hashes of the uid, so the structure is
deterministic and consumes no random draws.
"""

from __future__ import annotations

from math import exp, isfinite

from .errors import AuditError, DuplicatePointError
from .psi_model import _terms_pdf, _terms_ppf

BACKEND = "pure"

SIDE_NONE = 0
SIDE_LEFT = 1
SIDE_RIGHT = 2

AUDIT_TILING_TOL = 1e-9
AUDIT_TOTAL_TOL = 1e-9
AUDIT_INDEX_TOL = 1e-12

ODE_OK = 0
ODE_BLOWUP = 1
ODE_CAPPED = 2

_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Index:
    def __init__(self, points, alpha):
        self.has_alpha = alpha is not None
        self.alpha_val = float(alpha) if alpha is not None else -1.0
        self.rec_left = []
        self.rec_len = []
        self.rec_side = []
        self.ln_prio = []
        self.ln_l = []
        self.ln_r = []
        self.ln_sum_all = []
        self.ln_sum_l = []
        self.ln_sum_r = []
        self.ln_cnt = []
        self.pt_l = []
        self.pt_r = []
        self.ln_root = -1
        self.pt_root = -1
        self.n_points = 0
        self.n_points_alpha = 0
        self.ops = 0
        self.audit_every = 0

        pts = list(points)
        lefts = [0.0] + pts
        rights = pts + [1.0]
        self.n_initial = len(lefts)
        self.left0 = 0
        for i in range(self.n_initial):
            a = lefts[i]
            length = rights[i] - a
            if self.has_alpha:
                side = SIDE_LEFT if a < self.alpha_val else SIDE_RIGHT
            else:
                side = SIDE_NONE
            if side == SIDE_LEFT:
                self.left0 += 1
            uid = self._new_slot(a, length, side)
            self.ln_root = self._ln_ins(self.ln_root, uid)
            self.pt_root = self._pt_ins(self.pt_root, uid)

    # -- slots

    def _new_slot(self, left, length, side):
        uid = len(self.rec_left)
        self.rec_left.append(left)
        self.rec_len.append(length)
        self.rec_side.append(side)
        self.ln_prio.append(_mix64(uid))
        self.ln_l.append(-1)
        self.ln_r.append(-1)
        self.ln_sum_all.append(0.0)
        self.ln_sum_l.append(0.0)
        self.ln_sum_r.append(0.0)
        self.ln_cnt.append(0)
        self.pt_l.append(-1)
        self.pt_r.append(-1)
        self._ln_upd(uid)
        return uid

    # -- counters

    @property
    def n_intervals(self):
        return len(self.rec_len)

    @property
    def left_intervals(self):
        return self.left0 + self.n_points_alpha

    def get_left(self, uid):
        return self.rec_left[uid]

    def get_len(self, uid):
        return self.rec_len[uid]

    def get_side(self, uid):
        return self.rec_side[uid]

    # -- length treap

    def _ln_upd(self, t):
        ln = self.rec_len[t]
        sd = self.rec_side[t]
        s_all = ln
        s_l = ln if sd == SIDE_LEFT else 0.0
        s_r = ln if sd == SIDE_RIGHT else 0.0
        c = 1
        l = self.ln_l[t]
        if l != -1:
            s_all += self.ln_sum_all[l]
            s_l += self.ln_sum_l[l]
            s_r += self.ln_sum_r[l]
            c += self.ln_cnt[l]
        r = self.ln_r[t]
        if r != -1:
            s_all += self.ln_sum_all[r]
            s_l += self.ln_sum_l[r]
            s_r += self.ln_sum_r[r]
            c += self.ln_cnt[r]
        self.ln_sum_all[t] = s_all
        self.ln_sum_l[t] = s_l
        self.ln_sum_r[t] = s_r
        self.ln_cnt[t] = c

    def _ln_less(self, a, b):
        la = self.rec_len[a]
        lb = self.rec_len[b]
        if la < lb:
            return True
        return la == lb and a < b

    def _ln_rot_r(self, t):
        l = self.ln_l[t]
        self.ln_l[t] = self.ln_r[l]
        self.ln_r[l] = t
        self._ln_upd(t)
        self._ln_upd(l)
        return l

    def _ln_rot_l(self, t):
        r = self.ln_r[t]
        self.ln_r[t] = self.ln_l[r]
        self.ln_l[r] = t
        self._ln_upd(t)
        self._ln_upd(r)
        return r

    def _ln_ins(self, t, nd):
        if t == -1:
            return nd
        if self._ln_less(nd, t):
            self.ln_l[t] = self._ln_ins(self.ln_l[t], nd)
            if self.ln_prio[self.ln_l[t]] > self.ln_prio[t]:
                t = self._ln_rot_r(t)
            else:
                self._ln_upd(t)
        else:
            self.ln_r[t] = self._ln_ins(self.ln_r[t], nd)
            if self.ln_prio[self.ln_r[t]] > self.ln_prio[t]:
                t = self._ln_rot_l(t)
            else:
                self._ln_upd(t)
        return t

    def _ln_del(self, t, nd):
        if t == -1:
            raise AuditError("length index lost a node it should contain")
        if t == nd:
            l = self.ln_l[t]
            r = self.ln_r[t]
            if l == -1:
                return r
            if r == -1:
                return l
            if self.ln_prio[l] > self.ln_prio[r]:
                t = self._ln_rot_r(t)
                self.ln_r[t] = self._ln_del(self.ln_r[t], nd)
            else:
                t = self._ln_rot_l(t)
                self.ln_l[t] = self._ln_del(self.ln_l[t], nd)
            self._ln_upd(t)
            return t
        if self._ln_less(nd, t):
            self.ln_l[t] = self._ln_del(self.ln_l[t], nd)
        else:
            self.ln_r[t] = self._ln_del(self.ln_r[t], nd)
        self._ln_upd(t)
        return t

    def quantile(self, u):
        t = self.ln_root
        m = u * self.ln_sum_all[t]
        while True:
            l = self.ln_l[t]
            if l != -1:
                ls = self.ln_sum_all[l]
                if m <= ls:
                    t = l
                    continue
                m -= ls
            own = self.rec_len[t]
            if m <= own:
                return t
            r = self.ln_r[t]
            if r == -1:
                return t
            m -= own
            t = r

    def sbd(self, x, side):
        t = self.ln_root
        acc = 0.0
        while t != -1:
            if self.rec_len[t] <= x:
                l = self.ln_l[t]
                if l != -1:
                    if side == 0:
                        acc += self.ln_sum_all[l]
                    elif side == SIDE_LEFT:
                        acc += self.ln_sum_l[l]
                    else:
                        acc += self.ln_sum_r[l]
                if side == 0 or self.rec_side[t] == side:
                    acc += self.rec_len[t]
                t = self.ln_r[t]
            else:
                t = self.ln_l[t]
        return acc

    def delta_norm(self, delta, side):
        e = 1.0 - delta
        s = 0.0
        n = len(self.rec_len)
        for uid in range(n):
            if side == 0 or self.rec_side[uid] == side:
                s += self.rec_len[uid] ** e
        return s / delta

    def max_len(self):
        t = self.ln_root
        while self.ln_r[t] != -1:
            t = self.ln_r[t]
        return self.rec_len[t]

    def min_len(self):
        t = self.ln_root
        while self.ln_l[t] != -1:
            t = self.ln_l[t]
        return self.rec_len[t]

    def longest_uid(self):
        t = self.ln_root
        while self.ln_r[t] != -1:
            t = self.ln_r[t]
        return t

    def _cnt_len_lt(self, x):
        t = self.ln_root
        c = 0
        while t != -1:
            if self.rec_len[t] < x:
                l = self.ln_l[t]
                if l != -1:
                    c += self.ln_cnt[l]
                c += 1
                t = self.ln_r[t]
            else:
                t = self.ln_l[t]
        return c

    def _select(self, k):
        t = self.ln_root
        while True:
            l = self.ln_l[t]
            lc = self.ln_cnt[l] if l != -1 else 0
            if k < lc:
                t = l
            elif k == lc:
                return t
            else:
                k -= lc + 1
                t = self.ln_r[t]

    def n_tied_longest(self):
        return self.ln_cnt[self.ln_root] - self._cnt_len_lt(self.max_len())

    def tied_longest(self, i):
        return self._select(self._cnt_len_lt(self.max_len()) + i)

    # -- position treap

    def _pt_ins(self, t, nd):
        if t == -1:
            return nd
        if self.rec_left[nd] < self.rec_left[t]:
            self.pt_l[t] = self._pt_ins(self.pt_l[t], nd)
            if self.ln_prio[self.pt_l[t]] > self.ln_prio[t]:
                l = self.pt_l[t]
                self.pt_l[t] = self.pt_r[l]
                self.pt_r[l] = t
                t = l
        else:
            self.pt_r[t] = self._pt_ins(self.pt_r[t], nd)
            if self.ln_prio[self.pt_r[t]] > self.ln_prio[t]:
                r = self.pt_r[t]
                self.pt_r[t] = self.pt_l[r]
                self.pt_l[r] = t
                t = r
        return t

    def locate(self, x):
        t = self.pt_root
        cand = -1
        while t != -1:
            if self.rec_left[t] <= x:
                cand = t
                t = self.pt_r[t]
            else:
                t = self.pt_l[t]
        return cand

    # -- split

    def split(self, x):
        """Insert a point at x.  Returns the new uid, or -1 when x collides
        with an existing endpoint (nothing is modified in that case)."""
        return self.split_in(self.locate(x), x)

    def split_in(self, t, x):
        """Split interval t at x; x must lie in [left(t), left(t)+len(t)]."""
        a = self.rec_left[t]
        if x == a:
            return -1
        l = self.rec_len[t]
        len1 = x - a
        len2 = l - len1
        if len1 <= 0.0 or len2 <= 0.0:
            return -1
        self.ln_root = self._ln_del(self.ln_root, t)
        self.rec_len[t] = len1
        self.ln_l[t] = -1
        self.ln_r[t] = -1
        self._ln_upd(t)
        self.ln_root = self._ln_ins(self.ln_root, t)
        nd = self._new_slot(x, len2, self.rec_side[t])
        self.ln_root = self._ln_ins(self.ln_root, nd)
        self.pt_root = self._pt_ins(self.pt_root, nd)
        self.n_points += 1
        if self.has_alpha and x < self.alpha_val:
            self.n_points_alpha += 1
        self.ops += 1
        if self.audit_every > 0 and self.ops % self.audit_every == 0:
            self._auto_audit()
        return nd

    # -- snapshot / audit

    def fill_snapshot(self, lefts, lengths, sides):
        stack = []
        t = self.pt_root
        i = 0
        while stack or t != -1:
            while t != -1:
                stack.append(t)
                t = self.pt_l[t]
            t = stack.pop()
            lefts[i] = self.rec_left[t]
            lengths[i] = self.rec_len[t]
            sides[i] = self.rec_side[t]
            i += 1
            t = self.pt_r[t]

    def _chk_sums(self, root):
        """Recompute length-treap aggregates; return (max_err, bad_counts)."""
        max_err = 0.0
        bad_cnt = 0

        def rec(t):
            nonlocal max_err, bad_cnt
            if t == -1:
                return 0.0, 0.0, 0.0, 0
            la, ll, lr, lc = rec(self.ln_l[t])
            ra, rl, rr, rc = rec(self.ln_r[t])
            ln = self.rec_len[t]
            sd = self.rec_side[t]
            s_all = ln + la + ra
            s_l = (ln if sd == SIDE_LEFT else 0.0) + ll + rl
            s_r = (ln if sd == SIDE_RIGHT else 0.0) + lr + rr
            c = 1 + lc + rc
            err = abs(self.ln_sum_all[t] - s_all)
            e2 = abs(self.ln_sum_l[t] - s_l)
            if e2 > err:
                err = e2
            e3 = abs(self.ln_sum_r[t] - s_r)
            if e3 > err:
                err = e3
            if err > max_err:
                max_err = err
            if self.ln_cnt[t] != c:
                bad_cnt += 1
            return s_all, s_l, s_r, c

        rec(root)
        return max_err, bad_cnt

    def audit(self):
        """Full O(n) self-check.

        Returns (max_tiling_err, total_len_err, max_index_err,
        bad_count_nodes, bad_side_nodes, counter_mismatch).
        """
        max_tile = 0.0
        bad_side = 0
        left_cnt = 0
        # Kahan-compensated total of stored lengths.
        s = 0.0
        comp = 0.0
        prev_right = 0.0
        stack = []
        t = self.pt_root
        seen = 0
        while stack or t != -1:
            while t != -1:
                stack.append(t)
                t = self.pt_l[t]
            t = stack.pop()
            a = self.rec_left[t]
            ln = self.rec_len[t]
            d = abs(a - prev_right)
            if d > max_tile:
                max_tile = d
            prev_right = a + ln
            y = ln - comp
            tt = s + y
            comp = (tt - s) - y
            s = tt
            if self.has_alpha:
                want = SIDE_LEFT if a < self.alpha_val else SIDE_RIGHT
                if self.rec_side[t] != want:
                    bad_side += 1
                if a < self.alpha_val:
                    left_cnt += 1
            seen += 1
            t = self.pt_r[t]
        d = abs(prev_right - 1.0)
        if d > max_tile:
            max_tile = d
        total_err = abs(s - 1.0)
        max_index_err, bad_cnt = self._chk_sums(self.ln_root)
        mismatch = 0
        if seen != self.n_intervals:
            mismatch += 1
        if self.n_intervals != self.n_initial + self.n_points:
            mismatch += 1
        if self.has_alpha and left_cnt != self.left0 + self.n_points_alpha:
            mismatch += 1
        if self.ln_cnt[self.ln_root] != self.n_intervals:
            mismatch += 1
        return (max_tile, total_err, max_index_err, bad_cnt, bad_side, mismatch)

    def _auto_audit(self):
        rep = self.audit()
        if (rep[0] > AUDIT_TILING_TOL or rep[1] > AUDIT_TOTAL_TOL
                or rep[2] > AUDIT_INDEX_TOL or rep[3] or rep[4] or rep[5]):
            raise AuditError(f"periodic audit failed: {rep}")

    def corrupt_index(self, eps):
        """Test hook: damage a recorded length so audits must flag the index.

        uid 0 always holds the leftmost interval, and the damage survives
        later splits (aggregate repairs propagate the bad length), so both
        immediate and periodic audits can rely on it.
        """
        self.rec_len[0] += eps


# --- step loops -------------------------------------------------------------


def advance_psi(idx, buf, ks, ps, n_steps, alphas, counts):
    na = len(alphas)
    for _ in range(n_steps):
        w = buf.next()
        while w == 0.0:
            w = buf.next()
        u = _terms_ppf(ks, ps, w)
        t = idx.quantile(u)
        v = buf.next()
        x = idx.rec_left[t] + v * idx.rec_len[t]
        nd = idx.split_in(t, x)
        if nd < 0:
            v = buf.next()
            x = idx.rec_left[t] + v * idx.rec_len[t]
            nd = idx.split_in(t, x)
            if nd < 0:
                raise DuplicatePointError(
                    f"split point collided twice at x={x!r}")
        for j in range(na):
            if x < alphas[j]:
                counts[j] += 1


def _direct_pick(idx, buf, k, maximize):
    xs = []
    uids = []
    for _ in range(k):
        xi = buf.next()
        xs.append(xi)
        uids.append(idx.locate(xi))
    best = idx.rec_len[uids[0]]
    for i in range(1, k):
        li = idx.rec_len[uids[i]]
        if (li > best) if maximize else (li < best):
            best = li
    tied = []
    for uid in uids:
        if idx.rec_len[uid] == best and uid not in tied:
            tied.append(uid)
    if len(tied) > 1:
        r = buf.next()
        i = int(r * len(tied))
        if i >= len(tied):
            i = len(tied) - 1
        pick = tied[i]
    else:
        pick = tied[0]
    own = [xi for xi, uid in zip(xs, uids) if uid == pick]
    if len(own) > 1:
        r = buf.next()
        i = int(r * len(own))
        if i >= len(own):
            i = len(own) - 1
        return pick, own[i]
    return pick, own[0]


def advance_direct(idx, buf, k, maximize, n_steps, alphas, counts):
    na = len(alphas)
    for _ in range(n_steps):
        t, x = _direct_pick(idx, buf, k, maximize)
        nd = idx.split_in(t, x)
        if nd < 0:
            t, x = _direct_pick(idx, buf, k, maximize)
            nd = idx.split_in(t, x)
            if nd < 0:
                raise DuplicatePointError(
                    f"candidate point collided twice at x={x!r}")
        for j in range(na):
            if x < alphas[j]:
                counts[j] += 1


def advance_kakutani(idx, buf, n_steps, alphas, counts):
    na = len(alphas)
    for _ in range(n_steps):
        nd = -1
        x = 0.0
        for _attempt in range(2):
            c = idx.n_tied_longest()
            if c > 1:
                r = buf.next()
                i = int(r * c)
                if i >= c:
                    i = c - 1
                t = idx.tied_longest(i)
            else:
                t = idx.longest_uid()
            v = buf.next()
            x = idx.rec_left[t] + v * idx.rec_len[t]
            nd = idx.split_in(t, x)
            if nd >= 0:
                break
        if nd < 0:
            raise DuplicatePointError(
                f"split point collided twice at x={x!r}")
        for j in range(na):
            if x < alphas[j]:
                counts[j] += 1


# --- ODE kernel --------------------------------------------------------------


def ode_rk4(ks, ps, lam, grid, F, Fp, E, cap):
    """Integrate F' = lam*z*exp(-E), E' = pdf(F) along the grid (RK4).

    Returns (status, n_valid): status ODE_OK / ODE_BLOWUP (non-finite state)
    / ODE_CAPPED (F exceeded cap; integration stopped early).  Entries with
    index >= n_valid are unspecified.
    """
    n = len(grid)
    f = 0.0
    e = 0.0
    F[0] = 0.0
    E[0] = 0.0
    Fp[0] = lam * grid[0] * exp(-0.0)
    for i in range(1, n):
        z0 = grid[i - 1]
        z1 = grid[i]
        h = z1 - z0
        k1f = lam * z0 * exp(-e)
        k1e = _terms_pdf(ks, ps, f)
        zh = z0 + 0.5 * h
        e2 = e + 0.5 * h * k1e
        f2 = f + 0.5 * h * k1f
        k2f = lam * zh * exp(-e2)
        k2e = _terms_pdf(ks, ps, f2)
        e3 = e + 0.5 * h * k2e
        f3 = f + 0.5 * h * k2f
        k3f = lam * zh * exp(-e3)
        k3e = _terms_pdf(ks, ps, f3)
        e4 = e + h * k3e
        f4 = f + h * k3f
        k4f = lam * z1 * exp(-e4)
        k4e = _terms_pdf(ks, ps, f4)
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
