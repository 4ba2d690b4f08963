"""
A small Monte Carlo cell
========================

Run a few replications of one design and print the summary tables. The
records file lets an interrupted run pick up where it stopped.
"""
import tempfile
from pathlib import Path

from mstvtp import McScenario, run_scenario

scen = McScenario(dgp_id=1, T=500, estimation_models=["const"], R=3, n_starts=3, base_seed=0)
with tempfile.TemporaryDirectory() as tmp:
    result = run_scenario(scen, records_path=Path(tmp) / "records.jsonl")
    for name, rows in result.tables.items():
        print(name)
        for row in rows:
            print("  ", {k: round(v, 4) if isinstance(v, float) else v for k, v in row.items()})
    print("written:", [p.name for p in result.write_tables(tmp)])
