"""A small theorem campaign from ``demos/campaign.json``, printed and written to CSV.

Run with ``python demos/run_campaign.py [out.csv]``.
"""
import sys
from pathlib import Path

from multicz.harness import load_config
from multicz.harness.campaign import run_campaign
from multicz.harness.report import emit_report

cfg = load_config(Path(__file__).with_name("campaign.json"))
reports = run_campaign(cfg, progress=lambda rep: print(rep.summary()))
out = Path(sys.argv[1] if len(sys.argv) > 1 else "campaign.csv")
csv_path, json_path = emit_report(reports, out)
print(f"wrote {csv_path} and {json_path}")
