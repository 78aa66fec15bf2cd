"""Line-network schedules and their min-cut capacity.

A schedule of length ``l`` records the successful transmissions on the links
``v_0 -> v_1 -> ... -> v_l`` (source ``v_0``, terminal ``v_l``). Each
transmission is instantaneous and timestamps are unique, so a packet path is
a chain of transmissions on links ``1..l`` with strictly increasing times and
the capacity is the largest number of link-disjoint chains.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import networkx as nx
import numpy as np

from . import _kernels
from .rng import Stream

GENERATION_CAP_FACTOR = 10**6


class ScheduleError(ValueError):
    """Invalid schedule contents or a malformed schedule record."""


class ScheduleGenerationError(RuntimeError):
    pass


class Transmission(NamedTuple):
    link: int
    time: int


@dataclass(frozen=True, eq=False)
class Schedule:
    """Immutable schedule; ``links[i]`` and ``times[i]`` describe transmission ``i``."""

    length: int
    links: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        if self.length < 1:
            raise ScheduleError("line length must be positive")
        links = np.ascontiguousarray(self.links, dtype=np.int32)
        times = np.ascontiguousarray(self.times, dtype=np.int64)
        if links.shape != times.shape or links.ndim != 1:
            raise ScheduleError("links and times must be 1-D arrays of equal size")
        if links.size:
            if links.min() < 1 or links.max() > self.length:
                raise ScheduleError(f"link out of range [1, {self.length}]")
            if times.min() < 0:
                raise ScheduleError("negative timestamp")
            if np.any(np.diff(times) <= 0):
                raise ScheduleError("times must be strictly increasing")
        links.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "times", times)

    @classmethod
    def from_transmissions(cls, length: int, transmissions: Iterable[tuple[int, int]]) -> "Schedule":
        txs = sorted((Transmission(int(a), int(b)) for a, b in transmissions), key=lambda tx: tx.time)
        return cls(length, np.array([t.link for t in txs], dtype=np.int32), np.array([t.time for t in txs], dtype=np.int64))

    @property
    def transmissions(self) -> list[Transmission]:
        return list(self)

    def __iter__(self) -> Iterator[Transmission]:
        for a, b in zip(self.links.tolist(), self.times.tolist()):
            yield Transmission(a, b)

    def __len__(self) -> int:
        return int(self.links.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Schedule):
            return NotImplemented
        return (
            self.length == other.length
            and np.array_equal(self.links, other.links)
            and np.array_equal(self.times, other.times)
        )

    def per_link_counts(self) -> np.ndarray:
        """Transmission count of links 1..l (index 0 is link 1)."""
        return np.bincount(self.links, minlength=self.length + 1)[1:]

    def appended(self, link: int) -> "Schedule":
        """Copy with one more transmission on ``link`` after the last timestamp."""
        t = int(self.times[-1]) + 1 if len(self) else 1
        return Schedule(self.length, np.append(self.links, link), np.append(self.times, t))

    def __repr__(self) -> str:
        return f"Schedule(length={self.length}, transmissions={len(self)})"


def capacity(s: Schedule) -> int:
    """Greedy chain count: each link-``i`` transmission, in time order, takes
    the earliest unconsumed link-``(i-1)`` arrival with a smaller timestamp."""
    if len(s) == 0:
        return 0
    return int(_kernels.greedy_capacity_kernel(s.links, s.times, s.length))


def trellis_graph(s: Schedule) -> nx.DiGraph:
    """Time-expanded graph: unit traffic edges, uncapacitated memory edges.

    Node ``(v, t)`` is network node ``v`` at time ``t``. ``("s", 0)`` feeds
    every source instant and every terminal instant drains into ``("t", inf)``.
    """
    g = nx.DiGraph()
    source, sink = ("s", 0), ("t", float("inf"))
    g.add_node(source)
    g.add_node(sink)
    instants: dict[int, list[int]] = {}
    for link, time in s:
        g.add_edge((link - 1, time), (link, time), capacity=1)
        instants.setdefault(link - 1, []).append(time)
        instants.setdefault(link, []).append(time)
    for v, ts in instants.items():
        ts = sorted(set(ts))
        for a, b in zip(ts, ts[1:]):
            g.add_edge((v, a), (v, b))  # no capacity attribute = infinite
        if v == 0:
            g.add_edge(source, (0, ts[0]))
        if v == s.length:
            g.add_edge((v, ts[-1]), sink)
    return g


def capacity_maxflow_oracle(s: Schedule) -> int:
    """Max-flow from ``(s, 0)`` to ``(t, inf)`` on :func:`trellis_graph`."""
    g = trellis_graph(s)
    value, _ = nx.maximum_flow(g, ("s", 0), ("t", float("inf")))
    return int(value)


def generate_schedule(l: int, target_n: int, rng: Stream) -> Schedule:
    """Random schedule with capacity exactly ``target_n``.

    One transmission per tick (times 1, 2, ...) on a uniformly random link,
    one draw each, until the capacity reaches ``target_n``. Appending a unit
    edge raises the capacity by at most one, so the target is hit exactly.
    """
    if l < 1 or target_n < 1:
        raise ValueError("l and target_n must be positive")
    cap = GENERATION_CAP_FACTOR * target_n
    links = _kernels.generate_links_kernel(l, target_n, rng.state, cap)
    if links.size == 1 and links[0] == -1:
        raise ScheduleGenerationError(f"no capacity-{target_n} schedule within {cap} transmissions")
    return Schedule(l, links, np.arange(1, links.size + 1, dtype=np.int64))


def dumps(s: Schedule) -> str:
    out = io.StringIO()
    out.write(f"l={s.length}\n")
    for link, time in s:
        out.write(f"{link},{time}\n")
    return out.getvalue()


def loads(text: str) -> Schedule:
    """Parse the ``l=<int>`` header plus ``link,time`` lines format."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("l="):
        raise ScheduleError("line 1: expected header 'l=<int>'")
    try:
        length = int(lines[0][2:])
    except ValueError:
        raise ScheduleError(f"line 1: bad line length {lines[0][2:]!r}") from None
    if length < 1:
        raise ScheduleError("line 1: line length must be positive")
    links, times = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ScheduleError(f"line {lineno}: malformed line {raw!r}, expected 'link,time'")
        try:
            link, time = int(parts[0]), int(parts[1])
        except ValueError:
            raise ScheduleError(f"line {lineno}: malformed line {raw!r}, expected integers") from None
        if not 1 <= link <= length:
            raise ScheduleError(f"line {lineno}: link out of range ({link} not in [1, {length}])")
        if time < 0:
            raise ScheduleError(f"line {lineno}: negative time {time}")
        if times and time <= times[-1]:
            raise ScheduleError(f"line {lineno}: unsorted times ({time} after {times[-1]})")
        links.append(link)
        times.append(time)
    return Schedule(length, np.array(links, dtype=np.int32), np.array(times, dtype=np.int64))


def read_schedule(path: str | Path) -> Schedule:
    return loads(Path(path).read_text(encoding="utf-8"))


def write_schedule(s: Schedule, path: str | Path) -> None:
    Path(path).write_text(dumps(s), encoding="utf-8", newline="\n")
