"""Polygonal tessellations: generation, import/export, connectivity, geometry.

Meshes are plain vertex/element containers with per-face connectivity and
per-element geometric data (area, centroid, diameter, bounding box).  A
finished PolyMesh is treated as immutable except for the tag-assignment
helpers used during problem setup.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial import Voronoi

from .errors import MeshFormatError, NonManifoldError, NumericalError, ValidationError
from .geometry import (
    is_simple_polygon,
    polygon_centroid,
    polygon_diameter,
    polygon_signed_area,
)

INTERNAL = -1  # neighbor marker is a real element index on internal faces


@dataclass
class Face:
    """Oriented mesh face: one owner element, one neighbor or a boundary tag."""

    vertices: tuple[int, int]
    owner: int
    neighbor: int          # INTERNAL marker value -1 means: boundary face
    normal: np.ndarray     # unit, outward from the owner element
    length: float
    tag: int | None        # boundary label; None on internal faces

    @property
    def is_boundary(self) -> bool:
        return self.neighbor < 0


class ElementGeometry(NamedTuple):
    area: np.ndarray       # (nel,)
    centroid: np.ndarray   # (nel, 2)
    diameter: np.ndarray   # (nel,)
    bbox: np.ndarray       # (nel, 4) as [x1, x2, y1, y2]


def element_geometry(vertices: np.ndarray, elements) -> ElementGeometry:
    """Shoelace areas, centroids, max-pairwise diameters and tight bboxes."""
    nel = len(elements)
    area = np.empty(nel)
    centroid = np.empty((nel, 2))
    diameter = np.empty(nel)
    bbox = np.empty((nel, 4))
    for e, elem in enumerate(elements):
        poly = vertices[elem]
        a = polygon_signed_area(poly)
        if a <= 0.0:
            raise ValidationError(f"element {e} is degenerate or not counter-clockwise")
        area[e] = a
        centroid[e] = polygon_centroid(poly)
        diameter[e] = polygon_diameter(poly)
        bbox[e] = [poly[:, 0].min(), poly[:, 0].max(), poly[:, 1].min(), poly[:, 1].max()]
    return ElementGeometry(area, centroid, diameter, bbox)


def build_connectivity(vertices: np.ndarray, elements, boundary_labels=None,
                       default_boundary_tag: int = 1) -> list[Face]:
    """Classify element edges into internal and boundary faces.

    Each undirected vertex pair may be shared by at most two elements;
    anything else raises NonManifoldError.  Boundary labels are looked up
    by sorted vertex pair.
    """
    boundary_labels = boundary_labels or {}
    edge_map: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for e, elem in enumerate(elements):
        n = len(elem)
        for i in range(n):
            a, b = int(elem[i]), int(elem[(i + 1) % n])
            edge_map.setdefault((min(a, b), max(a, b)), []).append((e, i))

    faces: list[Face] = []
    for e, elem in enumerate(elements):
        n = len(elem)
        for i in range(n):
            a, b = int(elem[i]), int(elem[(i + 1) % n])
            key = (min(a, b), max(a, b))
            owners = edge_map[key]
            if len(owners) > 2:
                raise NonManifoldError(
                    f"face {key} shared by elements {[o[0] for o in owners]}")
            if owners[0] != (e, i):
                continue  # already emitted with the first element as owner
            d = vertices[b] - vertices[a]
            length = float(np.hypot(d[0], d[1]))
            if length == 0.0:
                raise ValidationError(f"element {e} has a zero-length edge at vertex {a}")
            normal = np.array([d[1], -d[0]]) / length
            if len(owners) == 2:
                faces.append(Face((a, b), e, owners[1][0], normal, length, None))
            else:
                tag = boundary_labels.get(key, default_boundary_tag)
                faces.append(Face((a, b), e, INTERNAL, normal, length, int(tag)))
    return faces


class PolyMesh:
    """Polygonal tessellation with connectivity and per-element geometry.

    Parameters
    ----------
    vertices : (nv, 2) array
    elements : sequence of vertex-index sequences, one per polygon (CCW;
        clockwise input is normalized)
    element_tags : optional per-element material identifiers (default 1)
    boundary_labels : optional {sorted vertex pair: tag} for boundary faces
        (unlisted boundary faces get ``default_boundary_tag``)
    """

    def __init__(self, vertices, elements, element_tags=None, boundary_labels=None,
                 default_boundary_tag: int = 1):
        self.vertices = np.array(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValidationError("vertices must be an (nv, 2) array")
        elems = []
        nv = len(self.vertices)
        for e, elem in enumerate(elements):
            idx = np.asarray(elem, dtype=int)
            if len(idx) < 3:
                raise ValidationError(f"element {e} has fewer than 3 vertices")
            if idx.min() < 0 or idx.max() >= nv:
                raise ValidationError(f"element {e} references vertex index out of range")
            if len(np.unique(idx)) != len(idx):
                raise ValidationError(f"element {e} repeats a vertex")
            poly = self.vertices[idx]
            if polygon_signed_area(poly) < 0.0:
                idx = idx[::-1].copy()
                poly = self.vertices[idx]
            if not is_simple_polygon(poly):
                raise ValidationError(f"element {e} is not a simple polygon")
            elems.append(idx)
        self.elements = elems
        self.element_tag = (np.ones(len(elems), dtype=int) if element_tags is None
                            else np.asarray(element_tags, dtype=int))
        if self.element_tag.shape != (len(elems),):
            raise ValidationError("element_tags length must match element count")
        geo = element_geometry(self.vertices, self.elements)
        self.area, self.centroid, self.diameter, self.bbox = geo
        self.faces = build_connectivity(self.vertices, self.elements, boundary_labels,
                                        default_boundary_tag)

    # -- basic queries ---------------------------------------------------

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def h_max(self) -> float:
        return float(self.diameter.max())

    def internal_faces(self):
        return [f for f in self.faces if not f.is_boundary]

    def boundary_faces(self):
        return [f for f in self.faces if f.is_boundary]

    def element_polygon(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def total_area(self) -> float:
        return float(self.area.sum())

    def neighbor_size_ratio(self) -> float:
        """Bounded-variation diagnostic: worst h ratio across internal faces."""
        worst = 1.0
        for f in self.faces:
            if f.is_boundary:
                continue
            hp, hm = self.diameter[f.owner], self.diameter[f.neighbor]
            worst = max(worst, hp / hm, hm / hp)
        return worst

    # -- setup-phase tag helpers ------------------------------------------

    def set_boundary_tags(self, classifier: Callable[[np.ndarray], int]) -> None:
        """Tag boundary faces by their midpoint (setup phase only)."""
        for f in self.faces:
            if f.is_boundary:
                mid = 0.5 * (self.vertices[f.vertices[0]] + self.vertices[f.vertices[1]])
                f.tag = int(classifier(mid))

    def set_element_tags(self, classifier: Callable[[np.ndarray], int]) -> None:
        """Tag elements by their centroid (setup phase only)."""
        for e in range(self.num_elements):
            self.element_tag[e] = int(classifier(self.centroid[e]))


# -- generation ------------------------------------------------------------


def _check_rectangle(domain):
    x1, x2, y1, y2 = (float(v) for v in domain)
    if not (x2 > x1 and y2 > y1):
        raise ValidationError("rectangle must have positive area")
    return x1, x2, y1, y2


def _mirrored(points: np.ndarray, domain) -> np.ndarray:
    x1, x2, y1, y2 = domain
    left = np.column_stack([2 * x1 - points[:, 0], points[:, 1]])
    right = np.column_stack([2 * x2 - points[:, 0], points[:, 1]])
    bottom = np.column_stack([points[:, 0], 2 * y1 - points[:, 1]])
    top = np.column_stack([points[:, 0], 2 * y2 - points[:, 1]])
    return np.vstack([points, left, right, bottom, top])


def _voronoi_cells(seeds: np.ndarray, domain):
    """Voronoi cells of the seeds clipped to the rectangle.

    Mirroring every seed across the four sides (PolyMesher's reflection
    device) bounds each interior cell by the domain edges, so the diagram
    restricted to the first n regions tiles the rectangle exactly.
    """
    vor = Voronoi(_mirrored(seeds, domain))
    cells = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise NumericalError(f"unbounded Voronoi region for seed {i}")
        verts = vor.vertices[region]
        angles = np.arctan2(verts[:, 1] - seeds[i, 1], verts[:, 0] - seeds[i, 0])
        order = np.argsort(angles)
        cells.append([region[j] for j in order])
    return vor.vertices, cells


def generate_voronoi_mesh(domain, n: int, lloyd_iterations: int = 100,
                          seed: int = 0) -> PolyMesh:
    """Lloyd-relaxed Voronoi tessellation of a rectangle with n convex cells.

    Deterministic for a fixed seed.  Cells are clipped to the rectangle via
    the mirrored-seed construction; Lloyd iteration moves each seed to its
    cell centroid.
    """
    domain = _check_rectangle(domain)
    if n < 1:
        raise ValidationError("element count must be >= 1")
    x1, x2, y1, y2 = domain
    rng = np.random.default_rng(seed)
    seeds = rng.uniform((x1, y1), (x2, y2), size=(n, 2))
    for _ in range(int(lloyd_iterations)):
        verts, cells = _voronoi_cells(seeds, domain)
        seeds = np.array([polygon_centroid(verts[c]) for c in cells])
    verts, cells = _voronoi_cells(seeds, domain)

    scale = min(x2 - x1, y2 - y1)
    snapped = verts.copy()
    for axis, lo, hi in ((0, x1, x2), (1, y1, y2)):
        near_lo = np.abs(snapped[:, axis] - lo) < 1e-9 * scale
        near_hi = np.abs(snapped[:, axis] - hi) < 1e-9 * scale
        snapped[near_lo, axis] = lo
        snapped[near_hi, axis] = hi

    used = sorted({v for cell in cells for v in cell})
    remap = {v: i for i, v in enumerate(used)}
    vertices = snapped[used]
    elements = [[remap[v] for v in cell] for cell in cells]
    return PolyMesh(vertices, elements)


def cartesian_mesh(nx: int, ny: int, domain=(0.0, 1.0, 0.0, 1.0)) -> PolyMesh:
    """Axis-aligned nx-by-ny quadrilateral grid on a rectangle."""
    x1, x2, y1, y2 = _check_rectangle(domain)
    if nx < 1 or ny < 1:
        raise ValidationError("grid dimensions must be >= 1")
    xs = np.linspace(x1, x2, nx + 1)
    ys = np.linspace(y1, y2, ny + 1)
    vid = lambda i, j: j * (nx + 1) + i
    vertices = np.array([[xs[i], ys[j]] for j in range(ny + 1) for i in range(nx + 1)])
    elements = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
                for j in range(ny) for i in range(nx)]
    return PolyMesh(vertices, elements)


def disk_mesh(center, radius: float, rings: int = 4, sectors: int = 16,
              tag: int = 1) -> PolyMesh:
    """Polar polygonal mesh of a disk: a triangle fan plus quad rings."""
    if radius <= 0 or rings < 1 or sectors < 3:
        raise ValidationError("disk_mesh needs radius > 0, rings >= 1, sectors >= 3")
    cx, cy = center
    vertices = [(cx, cy)]
    for r in range(1, rings + 1):
        rho = radius * r / rings
        for s in range(sectors):
            a = 2 * np.pi * s / sectors
            vertices.append((cx + rho * np.cos(a), cy + rho * np.sin(a)))
    ring = lambda r, s: 1 + (r - 1) * sectors + (s % sectors)
    elements = [[0, ring(1, s), ring(1, s + 1)] for s in range(sectors)]
    for r in range(1, rings):
        for s in range(sectors):
            elements.append([ring(r, s), ring(r + 1, s), ring(r + 1, s + 1), ring(r, s + 1)])
    mesh = PolyMesh(np.array(vertices), elements,
                    element_tags=np.full(len(elements), tag, dtype=int))
    return mesh


# -- agglomeration ----------------------------------------------------------


def _grow_regions(adjacency, nel, seeds_idx):
    """Deterministic multi-source BFS assignment of elements to seed regions."""
    owner = np.full(nel, -1, dtype=int)
    frontier = []
    for g, s in enumerate(seeds_idx):
        owner[s] = g
        frontier.append([s])
    active = True
    while active:
        active = False
        for g in range(len(seeds_idx)):
            new_frontier = []
            for e in frontier[g]:
                for nb in adjacency[e]:
                    if owner[nb] < 0:
                        owner[nb] = g
                        new_frontier.append(nb)
            frontier[g] = new_frontier
            active = active or bool(new_frontier)
    return owner


def _trace_region_boundary(elements, members):
    """Chain the unmatched directed edges of a member set into loops."""
    member_set = set(members)
    directed = set()
    for e in members:
        elem = elements[e]
        n = len(elem)
        for i in range(n):
            directed.add((int(elem[i]), int(elem[(i + 1) % n])))
    boundary = [d for d in directed if (d[1], d[0]) not in directed]
    nxt: dict[int, int] = {}
    for a, b in boundary:
        if a in nxt:
            return None  # pinch point: region touches itself at a vertex
        nxt[a] = b
    loops = []
    remaining = dict(nxt)
    while remaining:
        start = min(remaining)
        loop = [start]
        cur = remaining.pop(start)
        while cur != start:
            loop.append(cur)
            cur = remaining.pop(cur)
        loops.append(loop)
    return loops


def agglomerate(mesh: PolyMesh, target_n: int, seed: int = 0) -> PolyMesh:
    """Merge elements into target_n polygonal agglomerates by region growing.

    Merged elements keep every original boundary vertex (collinear vertices
    included) so that faces still match the untouched neighbors.  Total
    area is conserved; holes and pinched regions are avoided by retrying
    the (deterministic) seeding.
    """
    nel = mesh.num_elements
    if not 1 <= target_n <= nel:
        raise ValidationError("target_n must lie in [1, num_elements]")
    if target_n == nel:
        return PolyMesh(mesh.vertices.copy(), [e.copy() for e in mesh.elements],
                        mesh.element_tag.copy(), _boundary_label_map(mesh))

    adjacency: list[list[int]] = [[] for _ in range(nel)]
    for f in mesh.faces:
        if not f.is_boundary:
            adjacency[f.owner].append(f.neighbor)
            adjacency[f.neighbor].append(f.owner)

    for attempt in range(20):
        rng = np.random.default_rng(seed + 1000003 * attempt)
        seeds_idx = rng.choice(nel, size=target_n, replace=False)
        owner = _grow_regions(adjacency, nel, seeds_idx)
        unreached = np.flatnonzero(owner < 0)
        if unreached.size:
            warnings.warn("agglomerate: disconnected components kept whole")
            comp_id = {}
            for e in unreached:
                owner[e] = target_n + comp_id.setdefault(_component_root(adjacency, e), len(comp_id))
        groups = [np.flatnonzero(owner == g) for g in range(owner.max() + 1)]
        groups = [g for g in groups if g.size]

        polygons = []
        ok = True
        for members in groups:
            loops = _trace_region_boundary(mesh.elements, members.tolist())
            if loops is None or len(loops) != 1:
                ok = False
                break
            polygons.append(loops[0])
        if ok:
            break
    else:
        raise ValidationError("agglomerate: could not form simply connected regions")

    used = sorted({v for poly in polygons for v in poly})
    remap = {v: i for i, v in enumerate(used)}
    new_elements = [[remap[v] for v in poly] for poly in polygons]
    tags = np.array([mesh.element_tag[members[0]] for members in groups], dtype=int)
    labels = {}
    for (a, b), tag in _boundary_label_map(mesh).items():
        if a in remap and b in remap:
            na, nb = remap[a], remap[b]
            labels[(min(na, nb), max(na, nb))] = tag
    return PolyMesh(mesh.vertices[used], new_elements, tags, labels)


def _component_root(adjacency, start):
    seen = {int(start)}
    stack = [int(start)]
    while stack:
        e = stack.pop()
        for nb in adjacency[e]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return min(seen)


def _boundary_label_map(mesh: PolyMesh) -> dict[tuple[int, int], int]:
    out = {}
    for f in mesh.faces:
        if f.is_boundary:
            a, b = f.vertices
            out[(min(a, b), max(a, b))] = f.tag
    return out


# -- submesh extraction ------------------------------------------------------


def extract_submesh(mesh: PolyMesh, element_mask, interface_tag: int):
    """Restrict a mesh to a masked element subset.

    Faces cut by the restriction (internal faces whose other element falls
    outside the mask) become boundary faces with ``interface_tag``; true
    boundary faces keep their labels.  Returns (submesh, parent_elements,
    parent_vertices).
    """
    mask = np.asarray(element_mask, dtype=bool)
    if mask.shape != (mesh.num_elements,):
        raise ValidationError("element mask length must match element count")
    parent_elements = np.flatnonzero(mask)
    if parent_elements.size == 0:
        raise ValidationError("submesh mask selects no elements")
    used = sorted({int(v) for e in parent_elements for v in mesh.elements[e]})
    remap = {v: i for i, v in enumerate(used)}
    elements = [[remap[int(v)] for v in mesh.elements[e]] for e in parent_elements]

    labels = {}
    for f in mesh.faces:
        a, b = f.vertices
        if f.is_boundary:
            if mask[f.owner]:
                labels[(min(remap[a], remap[b]), max(remap[a], remap[b]))] = f.tag
        elif mask[f.owner] != mask[f.neighbor]:
            labels[(min(remap[a], remap[b]), max(remap[a], remap[b]))] = interface_tag
    sub = PolyMesh(mesh.vertices[used], elements, mesh.element_tag[parent_elements],
                   labels)
    return sub, parent_elements, np.array(used, dtype=int)


# -- plain-text mesh format ---------------------------------------------------


def export_mesh(mesh: PolyMesh, path) -> None:
    """Write the plain-text mesh format (see import_mesh)."""
    lines = ["polymesh 1"]
    lines.append(f"vertices {mesh.num_vertices}")
    for x, y in mesh.vertices:
        lines.append(f"{x!r} {y!r}")
    lines.append(f"elements {mesh.num_elements}")
    for tag, elem in zip(mesh.element_tag, mesh.elements):
        lines.append(" ".join([str(int(tag)), str(len(elem))] + [str(int(v)) for v in elem]))
    bfaces = mesh.boundary_faces()
    lines.append(f"boundary {len(bfaces)}")
    for f in bfaces:
        lines.append(f"{f.vertices[0]} {f.vertices[1]} {f.tag}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def import_mesh(path) -> PolyMesh:
    """Read the plain-text mesh format.

    Layout: header ``polymesh 1``; ``vertices N`` then N ``x y`` lines;
    ``elements M`` then M ``tag k v1 .. vk`` lines; ``boundary B`` then B
    ``v_a v_b label`` lines.  Whitespace separated, ``#`` starts a comment.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.readlines()
    tokens: list[tuple[int, str]] = []
    for ln, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0]
        tokens.extend((ln, tok) for tok in body.split())
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(tokens):
            last = tokens[-1][0] if tokens else 0
            raise MeshFormatError(f"line {last}: unexpected end of file reading {what}")
        out = tokens[pos:pos + n]
        pos += n
        return out

    def take_int(what):
        (ln, tok), = take(1, what)
        try:
            return int(tok)
        except ValueError:
            raise MeshFormatError(f"line {ln}: expected integer {what}, got {tok!r}") from None

    def take_float(what):
        (ln, tok), = take(1, what)
        try:
            return float(tok)
        except ValueError:
            raise MeshFormatError(f"line {ln}: expected number {what}, got {tok!r}") from None

    (ln, magic), (_, version) = take(2, "header")
    if magic != "polymesh" or version != "1":
        raise MeshFormatError(f"line {ln}: expected header 'polymesh 1'")
    (ln, kw), = take(1, "section")
    if kw != "vertices":
        raise MeshFormatError(f"line {ln}: expected 'vertices', got {kw!r}")
    nv = take_int("vertex count")
    vertices = np.array([[take_float("x"), take_float("y")] for _ in range(nv)])

    (ln, kw), = take(1, "section")
    if kw != "elements":
        raise MeshFormatError(f"line {ln}: expected 'elements', got {kw!r}")
    ne = take_int("element count")
    tags = []
    elements = []
    for _ in range(ne):
        tags.append(take_int("element tag"))
        k = take_int("element vertex count")
        elements.append([take_int("vertex index") for _ in range(k)])

    (ln, kw), = take(1, "section")
    if kw != "boundary":
        raise MeshFormatError(f"line {ln}: expected 'boundary', got {kw!r}")
    nb = take_int("boundary count")
    labels = {}
    for _ in range(nb):
        a = take_int("boundary vertex")
        b = take_int("boundary vertex")
        labels[(min(a, b), max(a, b))] = take_int("boundary label")
    if pos != len(tokens):
        raise MeshFormatError(f"line {tokens[pos][0]}: trailing content {tokens[pos][1]!r}")
    return PolyMesh(vertices, elements, np.array(tags, dtype=int), labels)
