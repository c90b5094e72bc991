"""SPICE-like RLC netlists, MNA stamping and mesh generators.

Grammar (one statement per line, case-insensitive keywords)::

    * comment                      full-line comment
    .title <text>                  optional title
    R<name> <n1> <n2> <value>      resistor (ohm)
    C<name> <n1> <n2> <value>      capacitor (farad)
    L<name> <n1> <n2> <value>      inductor (henry)
    I<name> <n+> <n-> <source>     current source, flowing from n+ to n-
    .end                           optional; later lines are ignored

``<source>`` is a plain value, ``DC <value>``, ``RAMP(<i0> <slope>)`` or
``PWL(<t1> <i1> <t2> <i2> ...)``.  Values accept the suffixes
f p n u m k meg g.  Node ``0`` is ground.
"""

import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching

from .errors import NetlistError
from .model import DaeSystem

GROUND = "0"

_SUFFIX = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3,
           "k": 1e3, "meg": 1e6, "g": 1e9}
_VALUE_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|[fpnumkg])?$", re.IGNORECASE)
_SOURCE_RE = re.compile(r"^(pwl|ramp)\s*\((.*)\)\s*$", re.IGNORECASE)


def parse_value(token, line=None, column=None):
    """Number with an optional SI suffix, e.g. ``1k``, ``2.2meg``, ``5e-3``."""
    m = _VALUE_RE.match(token)
    if not m:
        raise NetlistError(f"malformed value {token!r}", line, column)
    return float(m.group(1)) * _SUFFIX.get((m.group(2) or "").lower(), 1.0)


@dataclass(frozen=True)
class Element:
    name: str
    kind: str
    node_a: str
    node_b: str
    value: float
    source_kind: str = ""
    source_params: tuple = ()

    def source_at(self, t):
        """Current and its right-hand slope at time ``t`` (current sources)."""
        if self.kind != "I":
            raise ValueError(f"{self.name} is not a current source")
        if self.source_kind in ("", "dc"):
            return self.value, 0.0
        if self.source_kind == "ramp":
            i0, slope = self.source_params
            return i0 + slope * t, slope
        ts = np.array(self.source_params[0::2])
        vs = np.array(self.source_params[1::2])
        if t < ts[0]:
            return float(vs[0]), 0.0
        j = int(np.searchsorted(ts, t, side="right")) - 1
        if j >= ts.size - 1:
            return float(vs[-1]), 0.0
        slope = (vs[j + 1] - vs[j]) / (ts[j + 1] - ts[j])
        return float(vs[j] + slope * (t - ts[j])), float(slope)


@dataclass
class Netlist:
    elements: list = field(default_factory=list)
    title: str = ""

    @property
    def nodes(self):
        """Non-ground node names in order of first appearance."""
        seen = {}
        for e in self.elements:
            for n in (e.node_a, e.node_b):
                if n != GROUND and n not in seen:
                    seen[n] = None
        return list(seen)

    def count(self, kind):
        return sum(1 for e in self.elements if e.kind == kind)

    def counts(self):
        return {k: self.count(k) for k in "RCLI"}

    def __eq__(self, other):
        return (isinstance(other, Netlist) and self.title == other.title
                and self.elements == other.elements)


def _parse_source(rest, line, col):
    text = " ".join(rest)
    if not rest:
        raise NetlistError("current source needs a value", line, col)
    m = _SOURCE_RE.match(text)
    if m:
        kind = m.group(1).lower()
        toks = m.group(2).replace(",", " ").split()
        params = tuple(parse_value(tok, line, col) for tok in toks)
        if kind == "ramp":
            if len(params) != 2:
                raise NetlistError("RAMP expects (i0 slope)", line, col)
            return params[0], kind, params
        if len(params) < 2 or len(params) % 2:
            raise NetlistError("PWL expects pairs (t1 i1 t2 i2 ...)", line, col)
        ts = params[0::2]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise NetlistError("PWL times must be strictly increasing", line, col)
        return params[1], kind, params
    if rest[0].lower() == "dc":
        if len(rest) != 2:
            raise NetlistError("DC expects one value", line, col)
        return parse_value(rest[1], line, col), "dc", ()
    if len(rest) != 1:
        raise NetlistError(f"unexpected tokens after source value: {' '.join(rest[1:])!r}", line, col)
    return parse_value(rest[0], line, col), "", ()


def parse_netlist(text):
    """Parse netlist text.  Errors carry the 1-based line and column."""
    elements = []
    names = {}
    title = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        col0 = raw.index(stripped[0]) + 1
        low = stripped.lower()
        if low.startswith(".title"):
            title = stripped[6:].strip()
            continue
        if low == ".end":
            break
        if stripped.startswith("."):
            raise NetlistError(f"unknown directive {stripped.split()[0]!r}", lineno, col0)
        toks = []
        for m in re.finditer(r"\S+\s*\([^)]*\)|\S+", stripped):
            toks.append((m.group(0), col0 + m.start()))
        name, _ = toks[0]
        kind = name[0].upper()
        if kind not in "RCLI":
            raise NetlistError(f"unknown element kind {name[0]!r} in {name!r}", lineno, col0)
        if name.lower() in names:
            raise NetlistError(f"duplicate element name {name!r} (first on line {names[name.lower()]})",
                               lineno, col0)
        if len(toks) < 4:
            raise NetlistError(f"{name}: expected two nodes and a value", lineno, col0)
        (na, _), (nb, colb) = toks[1], toks[2]
        if na == nb:
            raise NetlistError(f"{name} connects node {na!r} to itself", lineno, colb)
        vtok, vcol = toks[3]
        if kind == "I":
            # Re-split the source spec so "PWL (0 0 1 1)" and "DC 1" both work.
            rest_text = stripped[vcol - col0:]
            m = _SOURCE_RE.match(rest_text)
            rest = [rest_text] if m else rest_text.split()
            value, skind, params = _parse_source(rest, lineno, vcol)
            elements.append(Element(name, kind, na, nb, value, skind, params))
        else:
            if len(toks) != 4:
                raise NetlistError(f"{name}: unexpected tokens after value", lineno, toks[4][1])
            value = parse_value(vtok, lineno, vcol)
            if not value > 0:
                raise NetlistError(f"{name}: value must be positive, got {vtok!r}", lineno, vcol)
            elements.append(Element(name, kind, na, nb, value))
        names[name.lower()] = lineno
    return Netlist(elements=elements, title=title)


def _fmt(x):
    return repr(float(x))


def serialize_netlist(net):
    """Text form that parses back to an equal :class:`Netlist`."""
    lines = []
    if net.title:
        lines.append(f".title {net.title}")
    for e in net.elements:
        if e.kind != "I":
            lines.append(f"{e.name} {e.node_a} {e.node_b} {_fmt(e.value)}")
        elif e.source_kind == "":
            lines.append(f"{e.name} {e.node_a} {e.node_b} {_fmt(e.value)}")
        elif e.source_kind == "dc":
            lines.append(f"{e.name} {e.node_a} {e.node_b} DC {_fmt(e.value)}")
        else:
            params = " ".join(_fmt(p) for p in e.source_params)
            lines.append(f"{e.name} {e.node_a} {e.node_b} {e.source_kind.upper()}({params})")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def read_netlist(path):
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


def unreachable_nodes(net):
    """Nodes with no path to ground through resistors or inductors (DC paths)."""
    adj = {n: set() for n in net.nodes}
    adj[GROUND] = set()
    for e in net.elements:
        if e.kind in "RL":
            adj[e.node_a].add(e.node_b)
            adj[e.node_b].add(e.node_a)
    seen = {GROUND}
    stack = [GROUND]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return [n for n in net.nodes if n not in seen]


@dataclass
class MnaStamp:
    system: DaeSystem
    node_index: dict
    branch_index: dict
    warnings: list = field(default_factory=list)


def stamp_mna(net, t0=0.0, x0=None):
    """Modified nodal analysis: ``C x' + G x = u0 + u1 (t - t0)``.

    Unknowns are the node voltages followed by one branch current per
    inductor.  Resistors stamp conductances into G, capacitors into the C
    nodal block, inductors ``L`` on the C branch diagonal and ``+-1``
    incidence in G (nodal rows ``+-i``, branch row ``v_b - v_a``), so G is
    positive semi-definite but not symmetric.  Current sources are
    linearized on the segment containing ``t0``.
    """
    nodes = net.nodes
    node_index = {n: i for i, n in enumerate(nodes)}
    inductors = [e for e in net.elements if e.kind == "L"]
    nn = len(nodes)
    branch_index = {e.name: nn + k for k, e in enumerate(inductors)}
    N = nn + len(inductors)
    Gr, Gc, Gv = [], [], []
    Cr, Cc, Cv = [], [], []
    u0 = np.zeros(N)
    u1 = np.zeros(N)

    def two_terminal(rows, cols, vals, a, b, y):
        ia, ib = node_index.get(a), node_index.get(b)
        for i, j, s in ((ia, ia, 1), (ib, ib, 1), (ia, ib, -1), (ib, ia, -1)):
            if i is not None and j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(s * y)

    for e in net.elements:
        if e.kind == "R":
            two_terminal(Gr, Gc, Gv, e.node_a, e.node_b, 1.0 / e.value)
        elif e.kind == "C":
            two_terminal(Cr, Cc, Cv, e.node_a, e.node_b, e.value)
        elif e.kind == "L":
            k = branch_index[e.name]
            Cr.append(k)
            Cc.append(k)
            Cv.append(e.value)
            for n, s in ((e.node_a, 1.0), (e.node_b, -1.0)):
                i = node_index.get(n)
                if i is not None:
                    Gr += [i, k]
                    Gc += [k, i]
                    Gv += [s, -s]
        elif e.kind == "I":
            val, slope = e.source_at(t0)
            for n, s in ((e.node_a, -1.0), (e.node_b, 1.0)):
                i = node_index.get(n)
                if i is not None:
                    u0[i] += s * val
                    u1[i] += s * slope
    G = sp.csr_matrix((Gv, (Gr, Gc)), shape=(N, N))
    C = sp.csr_matrix((Cv, (Cr, Cc)), shape=(N, N))
    G.sum_duplicates()
    C.sum_duplicates()
    warnings = []
    lost = unreachable_nodes(net)
    if lost:
        shown = ", ".join(lost[:5]) + (" ..." if len(lost) > 5 else "")
        warnings.append(f"{len(lost)} node(s) without a resistive path to ground: {shown}")
    system = DaeSystem(C=C, G=G, u0=u0, u1=u1, x0=x0)
    return MnaStamp(system=system, node_index=node_index, branch_index=branch_index,
                    warnings=warnings)


PAPER_LIKE = dict(rows=11, cols=17, n_rl=160, n_r_only=90, n_pads=10, n_loads=20,
                  r_value_range=(1e-2, 1e1), c_value_range=(1e-15, 1e-12),
                  l_value_range=(1e-12, 1e-9))


def _loguniform(rng, lo_hi):
    lo, hi = lo_hi
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def gen_rlc_mesh(rows=4, cols=4, r_value_range=(1e-2, 1e1), c_value_range=(1e-15, 1e-12),
                 l_value_range=(1e-12, 1e-9), seed=0, n_rl=None, n_r_only=None, n_pads=None,
                 n_node_caps=0, n_loads=None, load_slope_range=(1e-2, 1.0), preset=None):
    """Random power-grid style RLC mesh on a ``rows x cols`` node grid.

    A random spanning tree of the grid edges plus extra edges is used.
    ``n_rl`` of the edges are a resistor in series with an inductor whose
    midpoint carries a capacitor to ground; the other ``n_r_only`` edges are
    plain resistors.  ``n_pads`` grid nodes get a resistor to ground,
    ``n_node_caps`` grid nodes a capacitor to ground, and ``n_loads`` grid
    nodes draw a ramp current.  Values are log-uniform in the given ranges.

    ``preset="paper_like"`` gives 260 resistors, 160 capacitors and 160
    inductors with 507 unknowns.
    """
    if preset is not None:
        if preset != "paper_like":
            raise ValueError(f"unknown preset {preset!r}")
        return gen_rlc_mesh(seed=seed, **PAPER_LIKE)
    if rows < 2 or cols < 2:
        raise ValueError("rows and cols must be at least 2")
    rng = np.random.default_rng(seed)
    n_nodes = rows * cols
    cand = [((r, c), (r, c + 1)) for r in range(rows) for c in range(cols - 1)]
    cand += [((r, c), (r + 1, c)) for r in range(rows - 1) for c in range(cols)]
    n_edges_total = len(cand)
    if n_rl is None and n_r_only is None:
        n_rl = n_edges_total // 2
        n_r_only = n_edges_total - n_rl
    n_rl = 0 if n_rl is None else n_rl
    n_r_only = 0 if n_r_only is None else n_r_only
    n_edges = n_rl + n_r_only
    if n_edges < n_nodes - 1 or n_edges > n_edges_total:
        raise ValueError(f"edge count {n_edges} impossible for a {rows}x{cols} grid "
                         f"(need {n_nodes - 1}..{n_edges_total})")
    n_pads = max(1, n_nodes // 20) if n_pads is None else n_pads
    n_loads = max(1, n_nodes // 10) if n_loads is None else n_loads
    if not 1 <= n_pads <= n_nodes or n_node_caps > n_nodes or n_loads > n_nodes:
        raise ValueError("pad/cap/load counts impossible for the grid size")

    # Random spanning tree (Kruskal on a shuffled edge list), then extras.
    order = rng.permutation(n_edges_total)
    parent = list(range(n_nodes))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    idx = lambda rc: rc[0] * cols + rc[1]
    tree, rest = [], []
    for e in order:
        a, b = find(idx(cand[e][0])), find(idx(cand[e][1]))
        if a != b:
            parent[a] = b
            tree.append(e)
        else:
            rest.append(e)
    chosen = sorted(tree + rest[: n_edges - len(tree)])
    kinds = np.array(["R"] * n_edges, dtype=object)
    kinds[rng.choice(n_edges, n_rl, replace=False)] = "RL"
    flip = rng.random(n_edges) < 0.5
    pads = sorted(rng.choice(n_nodes, n_pads, replace=False).tolist())

    # Every component of the plain-resistor graph needs a resistor leading
    # away from it (a pad or the resistive end of an RL edge); otherwise the
    # algebraic block of G is singular.  Orient RL edges by a bipartite
    # matching of unanchored components to RL edges.
    plain = [(idx(cand[e][0]), idx(cand[e][1])) for e, kind in zip(chosen, kinds) if kind == "R"]
    adj = sp.coo_matrix((np.ones(len(plain)), tuple(np.array(plain, dtype=int).T.reshape(2, -1))),
                        shape=(n_nodes, n_nodes))
    _, comp = connected_components(adj, directed=False)
    need = sorted(set(comp.tolist()) - {int(comp[p]) for p in pads})
    rl = [k for k, kind in enumerate(kinds) if kind == "RL"]
    if need:
        row = {c: r for r, c in enumerate(need)}
        ri, ci = [], []
        for col, k in enumerate(rl):
            for end in cand[chosen[k]]:
                c = int(comp[idx(end)])
                if c in row:
                    ri.append(row[c])
                    ci.append(col)
        bip = sp.csr_matrix((np.ones(len(ri)), (ri, ci)), shape=(len(need), len(rl)))
        match = maximum_bipartite_matching(bip, perm_type="column")
        if np.any(match < 0):
            raise ValueError("cannot anchor every resistor component; increase n_pads or n_rl")
        for r, col in enumerate(match):
            k = rl[col]
            a = cand[chosen[k]][0]
            flip[k] = int(comp[idx(a)]) != need[r]

    name = lambda rc: f"n{rc[0]}_{rc[1]}"
    els = []
    nr = nc = nl = ni = 0
    for k, (e, kind, fl) in enumerate(zip(chosen, kinds, flip)):
        a, b = cand[e] if not fl else cand[e][::-1]
        nr += 1
        if kind == "R":
            els.append(Element(f"R{nr}", "R", name(a), name(b), _loguniform(rng, r_value_range)))
            continue
        mid = f"m{nl + 1}"
        nl += 1
        nc += 1
        els.append(Element(f"R{nr}", "R", name(a), mid, _loguniform(rng, r_value_range)))
        els.append(Element(f"L{nl}", "L", mid, name(b), _loguniform(rng, l_value_range)))
        els.append(Element(f"C{nc}", "C", mid, GROUND, _loguniform(rng, c_value_range)))
    for p in pads:
        nr += 1
        els.append(Element(f"R{nr}", "R", name((p // cols, p % cols)), GROUND,
                           _loguniform(rng, r_value_range)))
    for p in sorted(rng.choice(n_nodes, n_node_caps, replace=False).tolist()):
        nc += 1
        els.append(Element(f"C{nc}", "C", name((p // cols, p % cols)), GROUND,
                           _loguniform(rng, c_value_range)))
    for p in sorted(rng.choice(n_nodes, n_loads, replace=False).tolist()):
        ni += 1
        slope = _loguniform(rng, load_slope_range)
        els.append(Element(f"I{ni}", "I", name((p // cols, p % cols)), GROUND, 0.0,
                           "ramp", (0.0, slope)))
    title = f"rlc mesh {rows}x{cols} seed={seed}"
    return Netlist(elements=els, title=title)
