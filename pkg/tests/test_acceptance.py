"""Acceptance gate: one PASS/FAIL line per criterion, shown in the pytest summary."""

import itertools
import random
import time

from conftest import ACCEPTANCE, prop, ref

from stmreg import (
    BufferConfig,
    BufferPool,
    Formula,
    RegConfig,
    ResolutionQuery,
    dist_pia,
    resolve,
    sd_pia,
    similarity,
)
from stmreg.core import EMPTY
from stmreg.harness import (
    bundled_scenarios,
    brute_force_oracle,
    discriminates,
    load_scenario,
    run_scenario,
)
from stmreg.harness.worlds import random_world, unary_predicates

N_WORLDS = 150
N_SEQUENCES = 1000


def gate(n: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
    print(ACCEPTANCE[-1])
    assert ok, detail


def box_query(p):
    return p.predicate == "box"


def test_criterion_1_walkthrough():
    start = time.perf_counter()
    scenario = load_scenario("demo_teabox")
    world = scenario.build()
    box = Formula("box", (("X", "object"),))
    res = resolve(ResolutionQuery("X", ((box, EMPTY),)), world, scenario.config)
    objects = world["objects"]
    warmed = {e: objects.stm_contents(e) for e in res.candidates}

    before = len(objects.query_log)
    r1 = sd_pia(ref("objects_1"), world, scenario.config)
    log_o1 = objects.query_log[before:]
    r2 = sd_pia(ref("objects_2"), world, scenario.config)
    elapsed = time.perf_counter() - start

    trace = {(ev.phase, ev.prop): ev for ev in r1.trace}
    stm_box = trace.get(("stm-h", "box(objects_1)"))
    box_queries = [str(p) for p in log_o1 if box_query(p)]
    checks = {
        "candidates": res.candidates == (ref("objects_1"), ref("objects_2")),
        "buffers warmed": all(warmed[e] == [prop("box", str(e))] for e in res.candidates),
        "objects_1": set(r1.description[ref("objects_1")]) == {prop("box", "objects_1"), prop("red", "objects_1")},
        "objects_2": set(r2.description[ref("objects_2")]) == {prop("box", "objects_2"), prop("green", "objects_2")},
        "stm-h rules out objects_3": stm_box is not None and stm_box.eliminated == (ref("objects_3"),),
        "no box query on target or STM-held distractor": box_queries == ["box(objects_3)"],
        "objects_2 box check is an STM hit": r1.counters_snapshot["objects"].stm_hits == 1,
        "teabox skipped": trace[("helper", "teabox(objects_1)")].outcome == "no-elimination",
        "table skipped": trace[("helper", "table(objects_1)")].outcome == "target-fails",
        "under 1 s": elapsed < 1.0,
    }
    failed = [k for k, v in checks.items() if not v]
    gate(
        1,
        "walkthrough reproduction",
        not failed,
        f"failed: {failed}" if failed else
        f"{elapsed * 1000:.1f} ms; box LTM queries during describe: {box_queries} (objects_3 STM miss falls through)",
    )


def _suite():
    rng = random.Random(20240611)
    for _ in range(N_WORLDS):
        yield random_world(rng), rng


def test_criterion_2_empty_stm_equivalence():
    start = time.perf_counter()
    cold = RegConfig(populate_stm=False)
    mismatches, cases = [], 0
    for world, _ in _suite():
        for target in world.entities():
            cases += 1
            a = sd_pia(target, world, cold)
            b = dist_pia(target, world, cold)
            if (a.description, a.unresolved_distractors) != (b.description, b.unresolved_distractors):
                mismatches.append(str(target))
            if sum(c.ltm_queries for c in a.counters_snapshot.values()) != sum(
                c.ltm_queries for c in b.counters_snapshot.values()
            ):
                mismatches.append(f"{target} (query count)")
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 10
    gate(2, "empty-STM equivalence", ok,
         f"{N_WORLDS} worlds, {cases} targets, {len(mismatches)} mismatches, {elapsed:.2f} s")


def test_criterion_3_oracle_soundness():
    violations, full, impossible = [], 0, 0
    for world, rng in _suite():
        preds = unary_predicates(world)
        # warm some buffers so SD-PIA's STM path is exercised too
        warm_pred = rng.choice(preds)
        resolve(ResolutionQuery("X", ((warm_pred, EMPTY),)), world)
        for target in world.entities():
            minimal = brute_force_oracle(target, world)
            for algo in (sd_pia, dist_pia):
                result = algo(target, world)
                left = result.unresolved_distractors[target]
                props = set(result.description[target])
                if not left:
                    full += 1
                    if not discriminates(props, target, world):
                        violations.append(f"{algo.__name__} {target}: reported set does not discriminate")
                    elif not any(m <= props for m in minimal):
                        violations.append(f"{algo.__name__} {target}: no oracle set inside result")
                if not minimal:
                    impossible += 1
                    if not left:
                        violations.append(f"{algo.__name__} {target}: oracle proves no set, REG claims one")
    gate(3, "oracle soundness", not violations,
         f"{full} full discriminations checked, {impossible} impossible cases, {len(violations)} violations")


def test_criterion_4_query_count_benefit():
    report = run_scenario(load_scenario("demo_teabox"), "compare")
    cmp = report.comparison
    sd, dist = cmp["describe_ltm_queries"]["sd_pia"], cmp["describe_ltm_queries"]["dist_pia"]
    fetches, calls = cmp["sd_pia_stm_fetches"], cmp["sd_pia_stm_h_calls"]
    text = report.to_text()
    recorded = f"sd_pia ltm={sd} dist_pia ltm={dist}" in text and f"{fetches} over {calls} STM-H calls" in text
    ok = sd < dist and fetches == calls and calls > 0 and recorded
    gate(4, "query-count benefit", ok, f"describe ltm sd_pia={sd} dist_pia={dist}; {fetches} fetches / {calls} STM-H calls")


def _props(n_preds=6):
    # two predicates per category, plus a relation to exercise arity-level similarity
    out = [prop(f"q{i}", "objects_1") for i in range(n_preds)]
    out.append(prop("rel", "objects_1", "objects_2"))
    return out


CATEGORIES = {"q0": "a", "q1": "a", "q2": "b", "q3": "b", "q4": "c", "q5": "c"}
ENTITIES = [ref("objects_1"), ref("objects_2"), ref("objects_3")]


def _retarget(p, entity):
    names = p.formula.names
    return type(p)(p.formula, dict(zip(names, (entity,) + p.args[1:])))


def _sequence(rng, policy):
    """Drive one pool through random inserts and ticks, checking it against a model."""
    scope = rng.choice(["per_entity", "per_consultant_global"]) if policy != "decay" else "per_entity"
    cap = rng.randint(1, 4)
    ttl = rng.randint(1, 4)
    overrides = {"q0": rng.randint(1, 4)} if policy == "decay" and rng.random() < 0.5 else {}
    config = BufferConfig(policy, capacity=cap if policy != "decay" else None, ttl_ticks=ttl if policy == "decay" else None,
                          scope=scope, ttl_overrides=overrides)
    pool = BufferPool(config, CATEGORIES)
    base = _props()
    now = 0
    seq = itertools.count()
    # (entity, prop) -> [inserted_at, inserted_seq, last_refreshed, refreshed_seq]
    model: dict = {}
    errors = []

    def live(key, t):
        if policy != "decay":
            return True
        return t - model[key][2] <= config.ttl_for(key[1].predicate)

    for _ in range(rng.randint(5, 40)):
        if rng.random() < 0.25:
            now += rng.randint(0, 3)
        entity = rng.choice(ENTITIES)
        p = _retarget(rng.choice(base), entity)
        key = (entity, p)
        if policy == "decay":
            for k in [k for k in model if k[0] == entity and not live(k, now)]:
                del model[k]
        expected_victim = None
        if key in model:
            model[key][2] = now
            model[key][3] = next(seq)
        else:
            pool_keys = [k for k in model if scope == "per_consultant_global" or k[0] == entity]
            if policy != "decay" and len(pool_keys) >= cap:
                if policy == "capacity_fifo":
                    rank = lambda k: (model[k][0], model[k][1])
                elif policy == "capacity_lru":
                    rank = lambda k: (model[k][2], model[k][3])
                else:
                    rank = lambda k: (-similarity(k[1], p, CATEGORIES), model[k][0], model[k][1])
                expected_victim = min(pool_keys, key=rank)
                if policy == "interference":
                    best = max(similarity(k[1], p, CATEGORIES) for k in pool_keys)
                    if similarity(expected_victim[1], p, CATEGORIES) != best:
                        errors.append("model victim is not the similarity argmax")
                del model[expected_victim]
            s = next(seq)
            model[key] = [now, s, now, s]
        evicted = pool.insert(entity, p, now)
        if evicted != expected_victim:
            errors.append(f"evicted {evicted}, expected {expected_victim}")

        if policy != "decay":
            sizes = [len(pool.buffer(e)) for e in ENTITIES]
            if (scope == "per_entity" and max(sizes) > cap) or (scope != "per_entity" and sum(sizes) > cap):
                errors.append(f"capacity {cap} exceeded: {sizes}")
        probe = now + rng.randint(0, 5) if policy == "decay" else now
        for e in ENTITIES:
            contents = pool.contents(e, probe)
            if len(contents) != len(set(contents)):
                errors.append(f"duplicate entry in {e}")
            want = {k[1] for k in model if k[0] == e and live(k, probe)}
            if set(contents) != want:
                errors.append(f"{e} at t={probe}: {sorted(map(str, contents))} != {sorted(map(str, want))}")
        if policy == "decay":
            now = probe
            for k in [k for k in model if not live(k, now)]:
                del model[k]
    return errors


def test_criterion_5_buffer_policies():
    start = time.perf_counter()
    rng = random.Random(5)
    failures = {}
    for policy in ("capacity_fifo", "capacity_lru", "decay", "interference"):
        failures[policy] = sum(bool(_sequence(rng, policy)) for _ in range(N_SEQUENCES))

    # ttl boundary and interference tie-break, pinned explicitly
    edge = []
    pool = BufferPool(BufferConfig("decay", capacity=None, ttl_ticks=3))
    red = prop("red", "objects_1")
    pool.insert(red.entities()[0], red, 10)
    if not (pool.holds(red.entities()[0], red, 13) and not pool.holds(red.entities()[0], red, 14)):
        edge.append("decay boundary")
    pool = BufferPool(BufferConfig("interference", capacity=2), CATEGORIES)
    o1 = ref("objects_1")
    pool.insert(o1, prop("q2", "objects_1"), 0)
    pool.insert(o1, prop("q3", "objects_1"), 0)
    if pool.insert(o1, prop("q4", "objects_1"), 1) != (o1, prop("q2", "objects_1")):
        edge.append("interference tie-break")
    elapsed = time.perf_counter() - start
    ok = not any(failures.values()) and not edge and elapsed < 10
    gate(5, "buffer policy suite", ok,
         f"{N_SEQUENCES} sequences per policy, failing sequences {failures}, edge cases {edge or 'ok'}, {elapsed:.2f} s")


def test_criterion_6_spillover():
    scenario = load_scenario("tall_red_box")
    world = scenario.build()
    formulas = [Formula(p, (("X", "object"),)) for p in ("tall", "red", "box")]
    resolve(ResolutionQuery("X", tuple((f, EMPTY) for f in formulas)), world, scenario.config)
    objects = world["objects"]
    expected = {
        1: {"tall", "red", "box"},
        2: {"tall", "red"},
        3: {"tall"},
        4: set(),
        5: set(),
    }
    prefixes_ok = all(
        {p.predicate for p in objects.stm_contents(ref(f"objects_{i}"))} == preds for i, preds in expected.items()
    )
    target = ref("objects_3")
    before = len(objects.query_log)
    result = sd_pia(target, world, scenario.config)
    tall_queries = [p for p in objects.query_log[before:] if p == prop("tall", "objects_3")]
    via_stm = any(ev.phase == "stm-h" and ev.prop == "tall(objects_3)" and ev.outcome == "added" for ev in result.trace)
    described = prop("tall", "objects_3") in result.description[target]
    ok = prefixes_ok and via_stm and described and not tall_queries
    gate(6, "entrainment spillover", ok,
         f"prefixes {'exact' if prefixes_ok else 'WRONG'}; objects_3 -> "
         f"{{{', '.join(map(str, result.description[target]))}}}; tall(objects_3) LTM queries during describe: {len(tall_queries)}")


def test_criterion_7_staleness():
    report = run_scenario(load_scenario("stale_cache"), "compare")
    divs = report.comparison["divergences"]
    stale = prop("red", "objects_2")
    ok = (
        len(divs) == 1
        and "red(objects_2)" in divs[0]["sd_pia"]
        and "red(objects_2)" not in divs[0]["dist_pia"]
        and divs[0]["stale_in_sd_pia"] == [str(stale)]
        and "DIVERGENCE" in report.to_text()
    )
    detail = f"sd_pia {divs[0]['sd_pia']} vs dist_pia {divs[0]['dist_pia']}, flagged stale {divs[0]['stale_in_sd_pia']}" if divs else "no divergence"
    gate(7, "staleness demonstration", ok, detail)


def test_criterion_8_determinism():
    runs, differing = 0, []
    for name in bundled_scenarios():
        for mode in ("sd_pia", "dist_pia", "compare"):
            for seed in (0, 1, 99):
                a = run_scenario(load_scenario(name), mode, seed)
                b = run_scenario(load_scenario(name), mode, seed)
                runs += 1
                if a.to_text() != b.to_text() or a.to_json() != b.to_json():
                    differing.append(f"{name}/{mode}/{seed}")
    gate(8, "determinism", not differing, f"{runs} scenario/mode/seed pairs, {len(differing)} differing")
