"""Pure numpy versions of the compiled slot loops in ``_kernels.pyx``.

Same signatures, same outputs, same consumption of the raw 64-bit stream.
Used when the extension is not built or ``IIDCAST_PURE_PYTHON`` is set.
"""
import numpy as np

TWO_M53 = 1.0 / 9007199254740992.0


def bounded(raw, m):
    """Map raw uint64 draws onto ``[0, m)``; mirrors the C ``_bounded``."""
    r = ((raw >> np.uint64(11)).astype(np.float64) * TWO_M53 * m).astype(np.int64)
    return np.minimum(r, np.asarray(m, dtype=np.int64) - 1)


def _flood_slot(bit_generator, informed, n, n_cells):
    cell = bounded(bit_generator.random_raw(n), n_cells)
    hit = np.isin(cell, cell[informed])
    informed |= hit


def _flood_one(bit_generator, n, n_cells, max_steps, traj=None):
    informed = np.zeros(n, dtype=bool)
    src = int(bounded(np.uint64(bit_generator.random_raw()), n))
    informed[src] = True
    count = 1
    if traj is not None:
        traj.append(1)
    step = 0
    while count < n and step < max_steps:
        step += 1
        _flood_slot(bit_generator, informed, n, n_cells)
        count = int(informed.sum())
        if traj is not None:
            traj.append(count)
    return step if count == n else -1


def flood_times(bit_generators, n, n_cells, max_steps):
    return np.array([_flood_one(bg, n, n_cells, max_steps) for bg in bit_generators],
                    dtype=np.int64)


def flood_trajectory(bit_generator, n, n_cells, max_steps):
    traj = []
    steps = _flood_one(bit_generator, n, n_cells, max_steps, traj)
    return steps, np.array(traj, dtype=np.int64)


def fcfs_run(bit_generator, n, n_cells, service_slots, horizon, arrival_time, source,
             sample_every):
    m = len(arrival_time)
    start = np.full(m, -1, dtype=np.int64)
    finish = np.full(m, -1, dtype=np.int64)
    depart = np.full(m, -1, dtype=np.int64)
    backlog = np.zeros((horizon + sample_every - 1) // sample_every, dtype=np.int64)
    # arrivals with time <= t, for every boundary t
    arrived_by = np.searchsorted(arrival_time, np.arange(horizon), side="right")
    head = 0
    busy = False
    complete = False
    served = 0
    informed = np.zeros(n, dtype=bool)
    for t in range(horizon):
        arrived = arrived_by[t]
        if not busy and head < arrived:
            busy = True
            served = 0
            start[head] = t
            informed[:] = False
            informed[source[head]] = True
            complete = False
        assert busy or head == arrived, "server idle with a nonempty queue"
        if t % sample_every == 0:
            backlog[t // sample_every] = arrived - head
        if busy:
            if not complete:
                _flood_slot(bit_generator, informed, n, n_cells)
                if informed.all():
                    complete = True
                    finish[head] = t + 1
            served += 1
            if served == service_slots:
                depart[head] = t + 1
                head += 1
                busy = False
    return start, finish, depart, backlog


def single_hop_run(bit_generator, n, n_cells, horizon, warmup, arrival_slot, source,
                   src_offsets, src_packets, tagged_tx, tagged_rx, sample_every):
    m = len(arrival_slot)
    n_samples = (horizon + sample_every - 1) // sample_every
    delivered = np.zeros(m, dtype=np.int64)
    last = np.full(m, -1, dtype=np.int64)
    backlog = np.zeros(n_samples, dtype=np.int64)
    tagged_len = np.zeros(n_samples, dtype=np.int64)
    tag_wait = []
    served = np.zeros((n, n), dtype=np.int64)
    avail = np.zeros(n, dtype=np.int64)
    eligible = 0
    copies_in = copies_out = 0
    tag_act = all_act = all_sum = all_cnt = 0
    nodes = np.arange(n, dtype=np.int64)
    for t in range(horizon):
        while eligible < m and arrival_slot[eligible] < t:
            avail[source[eligible]] += 1
            copies_in += n - 1
            eligible += 1
        if t % sample_every == 0:
            backlog[t // sample_every] = copies_in - copies_out
            tagged_len[t // sample_every] = avail[tagged_tx] - served[tagged_tx, tagged_rx]
        keys = np.sort(bounded(bit_generator.random_raw(n), n_cells) * n + nodes)
        cell = keys // n
        bounds = np.flatnonzero(np.diff(cell)) + 1
        run_start = np.concatenate(([0], bounds))
        run_len = np.diff(np.concatenate((run_start, [n])))
        busy_runs = np.flatnonzero(run_len >= 2)
        if busy_runs.size == 0:
            continue
        raw = bit_generator.random_raw(2 * busy_runs.size).reshape(-1, 2)
        k = run_len[busy_runs]
        tx_idx = bounded(raw[:, 0], k)
        rx_idx = bounded(raw[:, 1], k - 1)
        rx_idx = rx_idx + (rx_idx >= tx_idx)
        base = run_start[busy_runs]
        txs = keys[base + tx_idx] % n
        rxs = keys[base + rx_idx] % n
        for tx, rx in zip(txs.tolist(), rxs.tolist()):
            if t >= warmup:
                all_act += 1
                if tx == tagged_tx and rx == tagged_rx:
                    tag_act += 1
            if served[tx, rx] < avail[tx]:
                pk = src_packets[src_offsets[tx] + served[tx, rx]]
                served[tx, rx] += 1
                copies_out += 1
                delivered[pk] += 1
                last[pk] = t
                wait = t - arrival_slot[pk]
                if arrival_slot[pk] >= warmup:
                    all_sum += wait
                    all_cnt += 1
                    if tx == tagged_tx and rx == tagged_rx:
                        tag_wait.append(wait)
    counters = dict(
        copies_in=copies_in, copies_out=copies_out,
        tagged_activations=tag_act, activations=all_act,
        wait_sum=int(all_sum), served=all_cnt,
    )
    return (counters, np.array(tag_wait, dtype=np.int64), delivered, last,
            backlog, tagged_len)
