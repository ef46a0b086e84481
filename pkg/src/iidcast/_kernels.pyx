# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot loops for the flooding, FCFS and single-hop simulators.

Every random draw goes through ``next_uint64`` of a numpy bit generator and is
mapped to a cell/index with :c:func:`_bounded`. The pure-numpy fallback in
``_pykernels`` consumes the same raw stream in the same order, so both
backends return identical results for identical generators.
"""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport qsort
from numpy.random cimport bitgen_t

cnp.import_array()

cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline bitgen_t* _bitgen(object bit_generator) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")


cdef inline int64_t _bounded(uint64_t x, int64_t m) noexcept nogil:
    cdef int64_t r = <int64_t>((<double>(x >> 11) * TWO_M53) * <double>m)
    if r >= m:
        r = m - 1
    return r


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef int64_t x = (<int64_t*>a)[0]
    cdef int64_t y = (<int64_t*>b)[0]
    return (x > y) - (x < y)


cdef inline int64_t _flood_slot(bitgen_t* rng, int64_t n, int64_t n_cells,
                                cnp.uint8_t[::1] informed, int64_t[::1] cell,
                                uint64_t[::1] stamp, uint64_t tick) noexcept nogil:
    # one slot: every node draws a cell; uninformed nodes sharing a cell with
    # an informed node join. Returns the number of newly informed nodes.
    cdef int64_t i, c, gained = 0
    for i in range(n):
        c = _bounded(rng.next_uint64(rng.state), n_cells)
        cell[i] = c
        if informed[i]:
            stamp[c] = tick
    for i in range(n):
        if not informed[i] and stamp[cell[i]] == tick:
            informed[i] = 1
            gained += 1
    return gained


cdef int64_t _flood_one(bitgen_t* rng, int64_t n, int64_t n_cells,
                        int64_t max_steps, cnp.uint8_t[::1] informed,
                        int64_t[::1] cell, uint64_t[::1] stamp,
                        uint64_t* stamp_clock, int64_t[::1] traj) noexcept nogil:
    cdef int64_t i, step, count, src
    cdef uint64_t tick
    cdef bint record = traj.shape[0] > 0
    for i in range(n):
        informed[i] = 0
    src = _bounded(rng.next_uint64(rng.state), n)
    informed[src] = 1
    count = 1
    if record:
        traj[0] = 1
    step = 0
    while count < n and step < max_steps:
        step += 1
        stamp_clock[0] += 1
        tick = stamp_clock[0]
        count += _flood_slot(rng, n, n_cells, informed, cell, stamp, tick)
        if record:
            traj[step] = count
    if count < n:
        return -1
    return step


def flood_times(list bit_generators, int64_t n, int64_t n_cells, int64_t max_steps):
    """Flooding time for one trial per bit generator (-1 marks a timeout)."""
    cdef Py_ssize_t t, n_trials = len(bit_generators)
    cdef cnp.ndarray[int64_t, ndim=1] out = np.empty(n_trials, dtype=np.int64)
    cdef cnp.uint8_t[::1] informed = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] cell = np.zeros(n, dtype=np.int64)
    cdef uint64_t[::1] stamp = np.zeros(n_cells, dtype=np.uint64)
    cdef int64_t[::1] no_traj = np.zeros(0, dtype=np.int64)
    cdef uint64_t clock = 0
    cdef bitgen_t* rng
    for t in range(n_trials):
        rng = _bitgen(bit_generators[t])
        with nogil:
            out[t] = _flood_one(rng, n, n_cells, max_steps, informed, cell,
                                stamp, &clock, no_traj)
    return out


def flood_trajectory(object bit_generator, int64_t n, int64_t n_cells, int64_t max_steps):
    """Single trial; returns (flooding time or -1, informed-count trajectory)."""
    cdef cnp.uint8_t[::1] informed = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] cell = np.zeros(n, dtype=np.int64)
    cdef uint64_t[::1] stamp = np.zeros(n_cells, dtype=np.uint64)
    traj_arr = np.zeros(max_steps + 1, dtype=np.int64)
    cdef int64_t[::1] traj = traj_arr
    cdef uint64_t clock = 0
    cdef bitgen_t* rng = _bitgen(bit_generator)
    cdef int64_t steps
    with nogil:
        steps = _flood_one(rng, n, n_cells, max_steps, informed, cell, stamp,
                           &clock, traj)
    used = steps if steps >= 0 else max_steps
    return steps, traj_arr[:used + 1].copy()


def fcfs_run(object bit_generator, int64_t n, int64_t n_cells, int64_t service_slots,
             int64_t horizon, double[::1] arrival_time, int64_t[::1] source,
             int64_t sample_every):
    """Slot loop of FCFS packet flooding.

    Returns per-packet (start, finish, depart) slot boundaries, -1 where the
    event did not happen before ``horizon``, and the sampled number of
    packets in the system.
    """
    cdef bitgen_t* rng = _bitgen(bit_generator)
    cdef int64_t m = arrival_time.shape[0]
    start_arr = np.full(m, -1, dtype=np.int64)
    finish_arr = np.full(m, -1, dtype=np.int64)
    depart_arr = np.full(m, -1, dtype=np.int64)
    backlog_arr = np.zeros((horizon + sample_every - 1) // sample_every, dtype=np.int64)
    cdef int64_t[::1] start = start_arr
    cdef int64_t[::1] finish = finish_arr
    cdef int64_t[::1] depart = depart_arr
    cdef int64_t[::1] backlog = backlog_arr
    cdef cnp.uint8_t[::1] informed = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] cell = np.zeros(n, dtype=np.int64)
    cdef uint64_t[::1] stamp = np.zeros(n_cells, dtype=np.uint64)
    cdef uint64_t tick = 0
    cdef int64_t t, i, arrived = 0, head = 0, served = 0, count = 0
    cdef bint busy = False, complete = False
    with nogil:
        for t in range(horizon):
            while arrived < m and arrival_time[arrived] <= <double>t:
                arrived += 1
            if not busy and head < arrived:
                busy = True
                served = 0
                start[head] = t
                for i in range(n):
                    informed[i] = 0
                informed[source[head]] = 1
                count = 1
                complete = count == n
                if complete:
                    finish[head] = t
            if t % sample_every == 0:
                backlog[t // sample_every] = arrived - head
            if busy:
                if not complete:
                    tick += 1
                    count += _flood_slot(rng, n, n_cells, informed, cell, stamp, tick)
                    if count == n:
                        complete = True
                        finish[head] = t + 1
                served += 1
                if served == service_slots:
                    depart[head] = t + 1
                    head += 1
                    busy = False
    return start_arr, finish_arr, depart_arr, backlog_arr


def single_hop_run(object bit_generator, int64_t n, int64_t n_cells, int64_t horizon,
                   int64_t warmup, int64_t[::1] arrival_slot, int64_t[::1] source,
                   int64_t[::1] src_offsets, int64_t[::1] src_packets,
                   int64_t tagged_tx, int64_t tagged_rx, int64_t sample_every):
    """Slot loop of the single-hop scheme over per-ordered-pair FIFO queues.

    Queue (i, j) holds a suffix of source i's packets, so it is represented by
    the count of i's packets already delivered to j. Returns a dict of
    aggregate counters plus per-packet delivery counts and last delivery slot.
    """
    cdef bitgen_t* rng = _bitgen(bit_generator)
    cdef int64_t m = arrival_slot.shape[0]
    cdef int64_t n_samples = (horizon + sample_every - 1) // sample_every
    delivered_arr = np.zeros(m, dtype=np.int64)
    last_arr = np.full(m, -1, dtype=np.int64)
    backlog_arr = np.zeros(n_samples, dtype=np.int64)
    tagged_len_arr = np.zeros(n_samples, dtype=np.int64)
    cdef int64_t[::1] delivered = delivered_arr
    cdef int64_t[::1] last = last_arr
    cdef int64_t[::1] backlog = backlog_arr
    cdef int64_t[::1] tagged_len = tagged_len_arr
    tag_wait_arr = np.zeros(src_offsets[tagged_tx + 1] - src_offsets[tagged_tx], dtype=np.int64)
    cdef int64_t[::1] tag_wait = tag_wait_arr
    cdef int64_t[::1] served = np.zeros(n * n, dtype=np.int64)
    cdef int64_t[::1] avail = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] keys = np.zeros(n, dtype=np.int64)
    cdef int64_t t, i, a, b, k, tx, rx, pk, wait, eligible = 0
    cdef int64_t copies_in = 0, copies_out = 0
    cdef int64_t tag_act = 0, tag_cnt = 0
    cdef int64_t all_act = 0, all_sum = 0, all_cnt = 0
    with nogil:
        for t in range(horizon):
            while eligible < m and arrival_slot[eligible] < t:
                avail[source[eligible]] += 1
                copies_in += n - 1
                eligible += 1
            if t % sample_every == 0:
                backlog[t // sample_every] = copies_in - copies_out
                tagged_len[t // sample_every] = avail[tagged_tx] - served[tagged_tx * n + tagged_rx]
            for i in range(n):
                keys[i] = _bounded(rng.next_uint64(rng.state), n_cells) * n + i
            qsort(&keys[0], n, sizeof(int64_t), _cmp_i64)
            a = 0
            while a < n:
                b = a + 1
                while b < n and keys[b] // n == keys[a] // n:
                    b += 1
                k = b - a
                if k >= 2:
                    tx = _bounded(rng.next_uint64(rng.state), k)
                    rx = _bounded(rng.next_uint64(rng.state), k - 1)
                    if rx >= tx:
                        rx += 1
                    tx = keys[a + tx] % n
                    rx = keys[a + rx] % n
                    if t >= warmup:
                        all_act += 1
                        if tx == tagged_tx and rx == tagged_rx:
                            tag_act += 1
                    if served[tx * n + rx] < avail[tx]:
                        pk = src_packets[src_offsets[tx] + served[tx * n + rx]]
                        served[tx * n + rx] += 1
                        copies_out += 1
                        delivered[pk] += 1
                        last[pk] = t
                        wait = t - arrival_slot[pk]
                        if arrival_slot[pk] >= warmup:
                            all_sum += wait
                            all_cnt += 1
                            if tx == tagged_tx and rx == tagged_rx:
                                tag_wait[tag_cnt] = wait
                                tag_cnt += 1
                a = b
    counters = dict(
        copies_in=copies_in, copies_out=copies_out,
        tagged_activations=tag_act, activations=all_act,
        wait_sum=all_sum, served=all_cnt,
    )
    return (counters, tag_wait_arr[:tag_cnt].copy(), delivered_arr, last_arr,
            backlog_arr, tagged_len_arr)
