"""Domain-wall re-encoding of one-hot route selectors.

A K-way choice is stored in K-1 boundary bits with virtual ends 1 and 0;
option i corresponds to the monotone string of i ones followed by zeros. The
selector x_i equals the difference of adjacent boundary bits, which sums to
one identically, so the one-hot penalty is dropped and only non-monotone
(wall-ascent) strings need penalizing. Chain couplings keep every variable's
penalty degree at most two.
"""

from dataclasses import dataclass

from .qubo import Penalties, PathVar, QuboProblem, SlackVar, WallVar


@dataclass(frozen=True)
class StreamBlock:
    """One stream's encoding: one-hot var ids in, wall var ids out."""

    stream: int
    k: int
    onehot: tuple[int, ...]
    wall: tuple[int, ...]


@dataclass(frozen=True)
class EncodingMap:
    """Variable translation table between one-hot and domain-wall problems.

    ``expressions`` maps each one-hot variable id to an affine form
    (constant, ((wall var id, coefficient), ...)) over the new variables;
    slack variables pass through with identity expressions.
    """

    streams: tuple[StreamBlock, ...]
    slack_map: dict[int, int]
    n_vars: int
    expressions: dict[int, tuple[float, tuple[tuple[int, float], ...]]]

    def block(self, stream: int) -> StreamBlock:
        for b in self.streams:
            if b.stream == stream:
                return b
        raise KeyError(f"no stream {stream}")


def build_encoding_map(q: QuboProblem) -> EncodingMap:
    """Lay out wall variables (stream-major) then carried slack variables."""
    per_stream: dict[int, list[int]] = {}
    slack_old: list[int] = []
    for i, meta in enumerate(q.var_meta):
        if isinstance(meta, PathVar):
            per_stream.setdefault(meta.stream, []).append(i)
        elif isinstance(meta, SlackVar):
            slack_old.append(i)
        else:
            raise ValueError(f"variable {i} is not a one-hot problem variable: {meta!r}")

    blocks = []
    expressions: dict[int, tuple[float, tuple[tuple[int, float], ...]]] = {}
    next_id = 0
    for s in sorted(per_stream):
        onehot = tuple(per_stream[s])
        k = len(onehot)
        wall = tuple(range(next_id, next_id + k - 1))
        next_id += k - 1
        blocks.append(StreamBlock(s, k, onehot, wall))
        for r, oid in enumerate(onehot):
            terms = []
            const = 0.0
            if r == 0:
                const = 1.0
            else:
                terms.append((wall[r - 1], 1.0))
            if r < k - 1:
                terms.append((wall[r], -1.0))
            expressions[oid] = (const, tuple(terms))
    slack_map = {}
    for old in slack_old:
        slack_map[old] = next_id
        expressions[old] = (0.0, ((next_id, 1.0),))
        next_id += 1
    return EncodingMap(tuple(blocks), slack_map, next_id, expressions)


def dw_penalty(k: int, lam: float) -> dict[tuple[int, int], float]:
    """Wall-ascent penalty terms for a K-way chain, on local ids 0..K-2.

    Each adjacent boundary pair contributes lam * b_{i+1} * (1 - b_i); the
    virtual ends contribute nothing. Zero at exactly the K monotone strings,
    at least lam elsewhere. K = 2 yields no terms (every 1-bit string is
    monotone).
    """
    if k < 2:
        raise ValueError(f"domain-wall penalty needs k >= 2, got {k}")
    terms: dict[tuple[int, int], float] = {}
    for i in range(k - 2):
        terms[(i + 1, i + 1)] = terms.get((i + 1, i + 1), 0.0) + lam
        terms[(i, i + 1)] = terms.get((i, i + 1), 0.0) - lam
    return terms


def wall_penalty_weight(q: QuboProblem) -> float:
    """Wall penalty strong enough that every violating state loses.

    A wall violation makes a selector's affine image swing outside {0, 1},
    and because the selector diagonals were reduced with x^2 = x, a -1
    excursion can *harvest* energy from the capacity terms instead of paying
    them. Each unit of swing on one selector gains at most that variable's
    absolute row sum, and one violation produces at most two units, so
    charging twice the largest selector row sum plus lambda2 per violation
    keeps every violating state at least lambda2 above the valid ones.
    """
    rows: dict[int, float] = {}
    for (i, j), c in q.q.items():
        rows[i] = rows.get(i, 0.0) + abs(c)
        if i != j:
            rows[j] = rows.get(j, 0.0) + abs(c)
    worst = max((rows.get(i, 0.0) for i, m in enumerate(q.var_meta)
                 if isinstance(m, PathVar)), default=0.0)
    lam2 = q.penalties.lambda2 if q.penalties is not None else 0.0
    return 2.0 * worst + lam2


def substitute(q: QuboProblem, em: EncodingMap,
               lambda_dw: float | None = None) -> QuboProblem:
    """Rewrite a one-hot QUBO over domain-wall variables.

    Removes the one-hot penalty pattern (its constraint holds identically
    under the encoding), substitutes each selector's affine expression into
    the remaining objective and capacity terms, and adds the wall-ascent
    penalty per stream. Energies of jointly valid states are preserved up to
    the new constant offset.
    """
    if q.penalties is None:
        raise ValueError("problem lacks penalty metadata; build it with build_qubo")
    lam2 = q.penalties.lambda2
    if lambda_dw is None:
        lambda_dw = (q.penalties.lambda_dw if q.penalties.lambda_dw is not None
                     else wall_penalty_weight(q))

    work = dict(q.q)
    offset = q.offset
    for block in em.streams:
        for oid in block.onehot:
            meta = q.var_meta[oid]
            if not (isinstance(meta, PathVar) and meta.stream == block.stream):
                raise ValueError("encoding map does not match this problem")
            work[(oid, oid)] = work.get((oid, oid), 0.0) + lam2
        for a in range(len(block.onehot)):
            for b in range(a + 1, len(block.onehot)):
                key = (block.onehot[a], block.onehot[b])
                work[key] = work.get(key, 0.0) - 2.0 * lam2
        offset -= lam2

    new_q: dict[tuple[int, int], float] = {}

    def add(i: int, j: int, c: float) -> None:
        if i > j:
            i, j = j, i
        new_q[(i, j)] = new_q.get((i, j), 0.0) + c

    for (i, j), c in work.items():
        if c == 0.0:
            continue
        ci, ti = em.expressions[i]
        if i == j:
            offset += c * ci
            for t, a in ti:
                add(t, t, c * a)
            continue
        cj, tj = em.expressions[j]
        offset += c * ci * cj
        for t, a in ti:
            add(t, t, c * a * cj)
        for u, b in tj:
            add(u, u, c * b * ci)
        for t, a in ti:
            for u, b in tj:
                # t == u folds onto the diagonal: boundary bits are binary.
                add(t, u, c * a * b)

    for block in em.streams:
        if block.k >= 2:
            for (i, j), c in dw_penalty(block.k, lambda_dw).items():
                add(block.wall[i], block.wall[j], c)

    meta: list = []
    for block in em.streams:
        meta += [WallVar(block.stream, p) for p in range(block.k - 1)]
    for old in sorted(em.slack_map, key=em.slack_map.get):
        meta.append(q.var_meta[old])

    pruned = {k: v for k, v in new_q.items() if v != 0.0}
    return QuboProblem(em.n_vars, pruned, offset, tuple(meta),
                       Penalties(q.penalties.lambda1, lam2, lambda_dw))


def decode(bits, em: EncodingMap) -> tuple[int | None, ...]:
    """Map wall bits to a route index per stream.

    Monotone non-increasing strings decode to the count of ones; any other
    string yields None for that stream. Slack bits are ignored.
    """
    out: list[int | None] = []
    for block in em.streams:
        seg = [int(bits[w]) for w in block.wall]
        if any(seg[i] < seg[i + 1] for i in range(len(seg) - 1)):
            out.append(None)
        else:
            out.append(sum(seg))
    return tuple(out)
