"""One test per acceptance criterion; each records a PASS/FAIL line for the run summary."""

import io
import json
import math
import time
from contextlib import redirect_stdout
from importlib import resources

import numpy as np
import pytest

from conftest import ACCEPTANCE
from metachem import cli, stringcat
from metachem.containers import SystemState, bag_json, jsonable, snapshot
from metachem.engine import Behavior, CapabilityError, RunConfig, Runner, step
from metachem.graph import NodeId, NodeKind, hard, make_graph, parse_graph, validate
from metachem.ja.algebra import INV_SQRT_2PI, best_pair, hermitian_eig3, jordan_product, strength
from metachem.ja.atoms import atom_matrices
from metachem.ja.particles import weight
from metachem.nested import VARIANTS, NestedConfig, build_variant, color_violations, run_nested, tank_atoms
from metachem.swarm.chem import FRAME_HEADER, FrameRecorder, SwarmConfig, run_swarm
from metachem.swarm.model import parse_recipe


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


class Checks:
    """Collects named boolean checks so one criterion line can summarise them."""

    def __init__(self):
        self.failed: list[str] = []

    def __call__(self, name: str, ok) -> None:
        if not ok:
            self.failed.append(name)

    @property
    def ok(self) -> bool:
        return not self.failed


# --------------------------------------------------------------------------
# 1. atom census


def test_1_atom_enumeration(tmp_path):
    out = io.StringIO()
    csv = tmp_path / "atoms.csv"
    t = time.perf_counter()
    with redirect_stdout(out):
        code = cli.main(["enumerate-atoms", "--csv-out", str(csv)])
    dt = time.perf_counter() - t
    text = out.getvalue()
    rows = csv.read_text().splitlines()
    c = Checks()
    c("exit code", code == 0)
    c("66 classes", "eigen_classes: 66" in text)
    c("both totals printed", "14580" in text and "14574" in text and "delta +6" in text)
    c("csv rows", len(rows) == 67)
    c("runtime", dt < 60)
    record(1, c.ok, f"classes=66 count=14580 (published 14574, delta +6) runtime={dt:.1f}s {c.failed or ''}")
    assert c.ok, c.failed


# --------------------------------------------------------------------------
# 2. StringCat worked example


def test_2_stringcat_worked_example():
    from metachem.containers import ParticleBag

    results = []
    for seed in range(20):
        g = stringcat.build_micro_process()
        s = SystemState.for_graph(g, {"S:composite": ["prexxpost"]})
        s.current = NodeId("a:split")
        Runner(g, stringcat.micro_behaviors(), np.random.default_rng(seed)).step(s)
        results.append(s.particles["S:composite"] == ParticleBag(["prex", "xpost"]))
    ok = all(results)
    record(2, ok, f"prexxpost -> {{prex, xpost}} in {sum(results)}/20 seeded runs")
    assert ok


# --------------------------------------------------------------------------
# 3. mass conservation


def test_3_mass_conservation_variant_V():
    cfg = NestedConfig(variant="V", steps=10**9)
    seen: set[int] = set()

    def watch(ev, runner):
        seen.add(runner.combined_total(runner.root, weight))

    t = time.perf_counter()
    res = run_nested(cfg, RunConfig(seed=0, max_transitions=10_000, keep_log=False), watch)
    dt = time.perf_counter() - t
    expected = cfg.agents * cfg.atoms_per_tank
    ok = res.transitions == 10_000 and seen == {expected} and tank_atoms(res.state.particles["T:Tank"]) == expected
    record(3, ok, f"{res.transitions} transitions ({res.total_events} events) totals seen={sorted(seen)} expected={expected} in {dt:.0f}s")
    assert ok


# --------------------------------------------------------------------------
# 4. engine semantics


class Fixed(Behavior):
    kind = NodeKind.ACTION

    def __init__(self, p):
        self.p = p

    def check(self, ctx):
        return self.p


class PushToTank(Behavior):
    kind = NodeKind.ACTION

    def push(self, ctx):
        ctx.add("T:t", ["x"])


def contents(state: SystemState) -> str:
    doc = {
        "particles": {str(c): bag_json(b) for c, b in sorted(state.particles.items())},
        "environments": {str(c): jsonable(e) for c, e in sorted(state.environments.items())},
    }
    return json.dumps(doc, sort_keys=True)


def test_4_engine_semantics():
    c = Checks()
    # (a) gate pass rate
    g = make_graph(["a:g"], [("a:g", "a:g")], [], "a:g")
    n = 100_000
    worst = 0.0
    for p in (0.1, 0.5, 0.8):
        runner = Runner(g, {"a:g": Fixed(p)}, np.random.default_rng(21), RunConfig(keep_log=False))
        s = SystemState.for_graph(g)
        rate = sum(runner.step(s).gate for _ in range(n)) / n
        z = abs(rate - (1 - p)) / math.sqrt(p * (1 - p) / n)
        worst = max(worst, z)
    c("gate", worst <= 3)

    # (b) decisions and terminations leave particles and environments alone, (c) empty local state
    cfg = stringcat.StringCatConfig(copies=4, tanks=2, reactions_per_step=8, time_bound=6)
    last: dict[int, str] = {}
    prev = {"depth": None}
    stats = {"checked": 0, "changed": 0, "dirty": 0}

    def state_at(runner, depth):
        return runner.root if depth == 0 else runner.frames[depth - 1].state

    def watch(ev, runner):
        if not runner.local.is_empty():
            stats["dirty"] += 1
        now = contents(state_at(runner, ev.depth))
        kind = NodeId(ev.node).kind
        if kind in (NodeKind.DECISION, NodeKind.TERMINATION) and prev["depth"] == ev.depth and ev.depth in last:
            stats["checked"] += 1
            stats["changed"] += now != last[ev.depth]
        last[ev.depth] = now
        prev["depth"] = ev.depth

    res = stringcat.run_stringcat(cfg, RunConfig(seed=3, log_micro=True), watch)
    c("run halted", res.halted)
    c("decisions checked", stats["checked"] > 50)
    c("decisions inert", stats["changed"] == 0)
    c("local state", stats["dirty"] == 0)

    # (d) capability
    tank = make_graph(["a:rogue", "T:t", "S:s"], [("a:rogue", "a:rogue")], [("a:rogue", "io", "S:s"), ("a:rogue", "read", "T:t")], "a:rogue")
    try:
        step(SystemState.for_graph(tank), tank, {"a:rogue": PushToTank()}, np.random.default_rng(0))
        c("capability", False)
    except CapabilityError as exc:
        c("capability code", exc.code == "CAPABILITY")

    # (e) equal seeds, equal logs
    run_cfg = stringcat.StringCatConfig(copies=4, tanks=3, reactions_per_step=10)
    a = stringcat.run_stringcat(run_cfg, RunConfig(seed=8, max_transitions=300))
    b = stringcat.run_stringcat(run_cfg, RunConfig(seed=8, max_transitions=300))
    c("logs", a.log_lines() == b.log_lines() and snapshot(a.state) == snapshot(b.state))

    record(4, c.ok, f"gate max |z|={worst:.2f}; {stats['checked']} decision/termination events inert; local state clean; CAPABILITY raised; logs identical {c.failed or ''}")
    assert c.ok, c.failed


# --------------------------------------------------------------------------
# 5. JA numerics


def test_5_ja_numerics():
    atoms = atom_matrices()
    res_max = mu_max = 0.0
    systems = []
    for m in atoms:
        e = hermitian_eig3(m)
        systems.append(e)
        for k in range(3):
            v = e.vector(k)
            res_max = max(res_max, float(np.linalg.norm(m @ v - e.values[k] * v)))
        mu_max = max(mu_max, abs(float(e.mu.sum()) - 1))
    rng = np.random.default_rng(5)
    herm_max = 0.0
    align_ok = True
    for _ in range(3):
        partner = rng.permutation(len(atoms))
        prod = 0.5 * (atoms @ atoms[partner] + atoms[partner] @ atoms)
        herm_max = max(herm_max, float(np.abs(prod - np.conj(np.swapaxes(prod, 1, 2))).max()))
        for i in range(0, len(atoms), 7):
            a = best_pair(systems[i], systems[partner[i]])[2]
            align_ok &= 0.0 <= a <= 1.0
    single = jordan_product(atoms[0], atoms[1])
    herm_max = max(herm_max, float(np.abs(single - single.conj().T).max()))
    s0 = abs(strength(0.25, 0.25) - 1 / math.sqrt(2 * math.pi))
    ok = res_max <= 1e-9 and mu_max <= 1e-12 and herm_max <= 1e-12 and align_ok and s0 <= 1e-12 and INV_SQRT_2PI > 0
    record(5, ok, f"{len(atoms)} atoms: residual<={res_max:.1e} |sum mu-1|<={mu_max:.1e} hermitian<={herm_max:.1e} alignment in [0,1]={align_ok} |strength(0)-1/sqrt(2pi)|={s0:.0e}")
    assert ok


# --------------------------------------------------------------------------
# 6. swarm


@pytest.fixture(scope="module")
def pulsing_eye():
    cfg = SwarmConfig(steps=100)
    rec = FrameRecorder(1)
    t = time.perf_counter()
    res = run_swarm(cfg, RunConfig(seed=0, keep_log=False), rec)
    return cfg, rec, res, time.perf_counter() - t


def speed_excess(rec):
    worst = 0.0
    for step_no, boids in rec.frames.items():
        for b in boids:
            worst = max(worst, b.speed - b.params.Vm)
    return worst


def test_6_swarm_properties(pulsing_eye, tmp_path):
    cfg, rec, res, dt = pulsing_eye
    c = Checks()
    counts = [n for n, _ in parse_recipe(cfg.recipe)]
    c("recipe counts", counts == [102, 124, 74])
    c("completed", res.halted and sorted(rec.frames) == list(range(101)))
    c("population", all(len(f) == 300 and {b.id for b in f} == set(range(300)) for f in rec.frames.values()))
    c("runtime", dt < 30)
    # velocities are set with the parameters held before this step's collision exchange
    flown = [(b, {o.id: o.params for o in rec.frames[k - 1]}[b.id]) for k in range(1, 101) for b in rec.frames[k]]
    c("speed <= max(Vn, Vm)", all(b.speed <= max(p.Vn, p.Vm) + 1e-9 for b, p in flown))

    lines = rec.csv().splitlines()
    c("csv header", lines[0] == FRAME_HEADER)
    c("csv rows", len(lines) == 1 + 101 * 300 and all(len(r.split(",")) == 14 for r in lines[1:]))
    c("csv numeric", all(math.isfinite(float(x)) for r in lines[1:301] for x in r.split(",")))

    # c5 = 1, whim off: every speed is the Vn the boid flew with during the step
    one = SwarmConfig(steps=1, whim=0.0, c5_override=1.0)
    rec1 = FrameRecorder(1)
    run_swarm(one, RunConfig(seed=0, keep_log=False), rec1)
    vn = {b.id: b.params.Vn for b in rec1.frames[0]}
    dev = max(abs(b.speed - vn[b.id]) for b in rec1.frames[1])
    c("speed == Vn", dev <= 1e-9)

    excess = speed_excess(rec)
    record(
        6,
        False,
        f"population 300 constant, csv ok, c5=1 |speed-Vn|<={dev:.0e}, {dt:.1f}s; per-boid speed <= Vm violated by up to {excess:.2f} "
        f"(recipe 3 has Vn > Vm) {c.failed or ''}",
    )
    assert c.ok, c.failed


@pytest.mark.xfail(strict=True, reason="recipe 3 of the pulsing eye has Vn 8.44 > Vm 4.39, so pacekeeping settles above Vm")
def test_6_literal_speed_bound(pulsing_eye):
    _, rec, _, _ = pulsing_eye
    assert speed_excess(rec) <= 1e-9


# --------------------------------------------------------------------------
# 7. nested coupling


def test_7_nested_coupling():
    c = Checks()
    small = dict(recipe="9 * (40, 2, 4, 0.3, 0.2, 5, 0, 0.5)", steps=6, atoms_per_tank=16)
    far = dict(small, spacing=1000.0)
    a = run_nested(NestedConfig(variant="I", **far), RunConfig(seed=12))
    b = run_nested(NestedConfig(variant="II", **far), RunConfig(seed=12))
    c("no collisions", a.state.environments["V:transfers"].get("pairs", []) == [])
    c("I == II tanks", a.state.particles["T:Tank"] == b.state.particles["T:Tank"])

    cfg = NestedConfig(variant="I", **dict(small, box=20.0))
    totals: set[int] = set()
    pairs_seen = [0]

    def watch(ev, runner):
        totals.add(runner.combined_total(runner.root, lambda p: 0 if hasattr(p, "params") else weight(p)))
        pairs_seen[0] += len(runner.root.environments["V:transfers"].get("pairs", []))

    res = run_nested(cfg, RunConfig(seed=3), watch)
    c("full loop", res.halted)
    c("collisions happened", pairs_seen[0] > 0)
    c("atoms conserved", totals == {9 * 16})

    colour = {v: color_violations(build_variant(v)) for v in VARIANTS}
    c("colour separation", all(not x for x in colour.values()))
    c("V and VI share a graph", build_variant("V") == build_variant("VI"))
    c("V and VI differ by tank count", NestedConfig(variant="V").n_tanks() == 1 and NestedConfig(variant="VI").n_tanks() == 16)
    record(7, c.ok, f"I==II tanks without collisions; atoms {sorted(totals)} over the loop; colour clean on {len(VARIANTS)} variants; V/VI same graph {c.failed or ''}")
    assert c.ok, c.failed


# --------------------------------------------------------------------------
# 8. validation corpus

CORPUS = {
    "stringcat_macro.mcg": "macro StringCat",
    "stringcat_macro_term.mcg": "macro StringCat with time bound",
    "stringcat_process.mcg": "StringCat a:process",
    "ja_macro.mcg": "JA macro",
    "swarm_macro.mcg": "swarm macro",
    "swarm_flock.mcg": "swarm a:Flock",
    "nested_I.mcg": "nested variant I",
}


def test_8_graph_corpus():
    hard_counts = {}
    warnings = {}
    for name in CORPUS:
        g = parse_graph(resources.files("metachem.graphs").joinpath(name).read_text(encoding="utf-8"))
        vs = validate(g)
        hard_counts[name] = len(hard(vs))
        warnings[name] = sum(v.code == "NOTATION_ABUSE" for v in vs)
    ok = all(n == 0 for n in hard_counts.values()) and warnings["nested_I.mcg"] == 4
    record(8, ok, f"{len(CORPUS)} files, hard violations {sum(hard_counts.values())}, nested_I NOTATION_ABUSE={warnings['nested_I.mcg']}")
    assert ok
