"""Run the randomized suite described in ``suite.cfg`` and write a report.

Equivalent to ``nmplab suite --config demos/suite.cfg --out <dir>``.
"""

import sys
import tempfile
from pathlib import Path

from nmplab.harness import load_config, min_slack, run_and_report

cfg = load_config(str(Path(__file__).with_name("suite.cfg")))
out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="nmplab-suite-")
records = run_and_report(cfg, out)
print(f"{len(records)} records written to {out}")
for key, value in sorted(min_slack(records).items()):
    print(f"  {key:<32} min slack {value:.4g}")
print((Path(out) / "summary.md").read_text())
