"""Per-layer DMA traffic of the shipped model as the L1 budget shrinks.

    python3 scripts/tiling_study.py
"""

from __future__ import annotations

from edgenode.scenario_io import DEFAULT_MODEL, load_model
from edgenode.tiler import KiB, InfeasibleError, MemoryHierarchy, plan_graph


def main() -> None:
    model = load_model(DEFAULT_MODEL)
    print("l1_kib,depth,dma_in,dma_out,dma_total,max_tiles")
    for l1 in (512, 256, 128, 64, 32, 16, 8):
        for depth in (2, 3):
            try:
                g = plan_graph(model, MemoryHierarchy(l1 * KiB), depth)
            except InfeasibleError as exc:
                print(f"{l1},{depth},infeasible ({exc.layer})")
                continue
            print(f"{l1},{depth},{g.dma_bytes_in},{g.dma_bytes_out},{g.dma_total},{max(p.tiles_total for p in g.plans)}")


if __name__ == "__main__":
    main()
