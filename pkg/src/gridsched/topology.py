"""Directed, capacity-annotated network graph and path discovery."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DuplicateLink, DuplicateNode, InvalidCapacity, UnknownNode

DEFAULT_MAX_PATHS = 4


@dataclass(frozen=True)
class Link:
    id: str
    name: str
    source: str
    dest: str
    capacity: int  # kbps

    def __post_init__(self):
        if self.capacity <= 0:
            raise InvalidCapacity(f"link {self.id!r}: capacity must be > 0, got {self.capacity}")
        if self.source == self.dest:
            raise ValueError(f"link {self.id!r}: source and dest must differ")


@dataclass(frozen=True)
class Path:
    """An ordered chain of links from ``source`` to ``dest``."""

    links: tuple[Link, ...]

    def __post_init__(self):
        if not self.links:
            raise ValueError("a path needs at least one link")
        seen = {self.links[0].source}
        for prev, nxt in zip(self.links, self.links[1:]):
            if prev.dest != nxt.source:
                raise ValueError(f"links {prev.id!r} and {nxt.id!r} do not chain")
        for link in self.links:
            if link.dest in seen:
                raise ValueError(f"path revisits node {link.dest!r}")
            seen.add(link.dest)

    @property
    def source(self) -> str:
        return self.links[0].source

    @property
    def dest(self) -> str:
        return self.links[-1].dest

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(link.id for link in self.links)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.source,) + tuple(link.dest for link in self.links)

    @property
    def bottleneck(self) -> int:
        return min(link.capacity for link in self.links)

    @property
    def hops(self) -> int:
        return len(self.links)

    @property
    def key(self) -> str:
        return "+".join(self.link_ids)

    def shares_link(self, other: Path) -> bool:
        return not set(self.link_ids).isdisjoint(other.link_ids)

    def __str__(self):
        return self.key


@dataclass
class Topology:
    nodes: dict[str, None] = field(default_factory=dict)  # insertion-ordered set
    links: dict[str, Link] = field(default_factory=dict)

    def add_node(self, name: str) -> str:
        if not name:
            raise ValueError("node name must be non-empty")
        if name in self.nodes:
            raise DuplicateNode(name)
        self.nodes[name] = None
        return name

    def add_link(self, name: str, source: str, dest: str, capacity_kbps: int,
                 link_id: str | None = None) -> Link:
        link_id = name if link_id is None else link_id
        for node in (source, dest):
            if node not in self.nodes:
                raise UnknownNode(node)
        if link_id in self.links:
            raise DuplicateLink(link_id)
        link = Link(link_id, name, source, dest, int(capacity_kbps))
        self.links[link_id] = link
        return link

    def outgoing(self, node: str) -> list[Link]:
        return sorted((l for l in self.links.values() if l.source == node), key=lambda l: l.id)

    def enumerate_paths(self, source: str, dest: str,
                        max_paths: int | None = DEFAULT_MAX_PATHS) -> list[Path]:
        """All simple paths from ``source`` to ``dest``, best first.

        Ordering is by descending bottleneck capacity, then fewer hops, then
        the lexicographic sequence of link ids. ``max_paths=None`` returns
        every path.
        """
        for node in (source, dest):
            if node not in self.nodes:
                raise UnknownNode(node)
        if source == dest:
            raise ValueError("source and dest must differ")

        found: list[tuple[Link, ...]] = []
        stack: list[Link] = []
        visited = {source}

        def walk(node: str) -> None:
            for link in self.outgoing(node):
                if link.dest in visited:
                    continue
                stack.append(link)
                if link.dest == dest:
                    found.append(tuple(stack))
                else:
                    visited.add(link.dest)
                    walk(link.dest)
                    visited.discard(link.dest)
                stack.pop()

        walk(source)
        paths = [Path(links) for links in found]
        paths.sort(key=lambda p: (-p.bottleneck, p.hops, p.link_ids))
        return paths if max_paths is None else paths[:max_paths]

    def path(self, *link_ids: str) -> Path:
        return Path(tuple(self.links[i] for i in link_ids))
