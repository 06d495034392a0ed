"""Print the headline energy figures next to their published targets.

    python3 scripts/reproduce_headlines.py
"""

from __future__ import annotations

import time

from edgenode.dutycycle import per_sample_energy, savings_percent, simulate
from edgenode.energy import best_efficiency, efficiency_pp_per_mj, lifetime_hours
from edgenode.scenario_io import SCENARIO_DIR, load_scenario

def main() -> None:
    edge = load_scenario(SCENARIO_DIR / "edge_192.cfg")
    stream = load_scenario(SCENARIO_DIR / "streaming.cfg")
    e2e = load_scenario(SCENARIO_DIR / "end_to_end.cfg")

    e_mj, s_mj = per_sample_energy(edge.workload), per_sample_energy(stream.workload)
    e_mw, s_mw = e_mj / 2, s_mj / 2
    best = best_efficiency(edge.configs)
    t0 = time.perf_counter()
    sim = simulate(e2e.workload, e2e.policy, None, 86400, e2e.battery)
    sim_s = time.perf_counter() - t0

    rows = [
        ("best-efficiency resolution", best.input_resolution, 192, "exact"),
        ("efficiency at best [pp/mJ]", efficiency_pp_per_mj(best), 13.6, "[13.0, 13.8]"),
        ("edge per-sample [mJ]", e_mj, 4.6, "2%"),
        ("streaming per-sample [mJ]", s_mj, 7.86, "3%"),
        ("savings [%]", savings_percent(e_mj, s_mj), 42.0, "1 pp"),
        ("edge average power [mW]", e_mw, 2.29, "3%"),
        ("streaming average power [mW]", s_mw, 3.93, "3%"),
        ("edge lifetime [days]", lifetime_hours(e_mw, edge.battery) / 24, 40.0, "> 40"),
        ("streaming lifetime [days]", lifetime_hours(s_mw, stream.battery) / 24, 24.0, "1 day"),
        ("end-to-end cycle [mJ]", sim.cycle_energy_mj, 929.0, "3%"),
        ("end-to-end average power [mW]", sim.average_power_mw, 15.5, "3%"),
        ("end-to-end lifetime [h]", sim.lifetime_h(e2e.battery), 143.0, "3%"),
    ]
    w = max(len(r[0]) for r in rows)
    print(f"{'quantity'.ljust(w)}  {'ours':>10}  {'published':>9}  tolerance")
    for label, ours, target, tol in rows:
        print(f"{label.ljust(w)}  {ours:>10.3f}  {target:>9}  {tol}")
    print(f"24 h end-to-end simulation: {len(sim.trace.events)} events in {sim_s:.2f} s")


if __name__ == "__main__":
    main()
